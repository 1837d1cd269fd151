#include "sesame/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sesame/errors.hpp"
#include "sesame/rng.hpp"

namespace sesame {

std::string to_string(Heuristic h) {
  switch (h) {
    case Heuristic::none: return "none";
    case Heuristic::lexical_overlap: return "lexical_overlap";
    case Heuristic::subsequence: return "subsequence";
    case Heuristic::constituent: return "constituent";
  }
  throw InputError("unknown heuristic value");
}

std::string to_string(Subset s) {
  switch (s) {
    case Subset::none: return "none";
    case Subset::heuristic_entailed: return "heuristic_entailed";
    case Subset::heuristic_nonentailed: return "heuristic_nonentailed";
  }
  throw InputError("unknown subset value");
}

Heuristic parse_heuristic(const std::string& text) {
  if (text == "none") return Heuristic::none;
  if (text == "lexical_overlap") return Heuristic::lexical_overlap;
  if (text == "subsequence") return Heuristic::subsequence;
  if (text == "constituent") return Heuristic::constituent;
  throw FormatError("unknown heuristic '" + text + "'");
}

Subset parse_subset(const std::string& text) {
  if (text == "none") return Subset::none;
  if (text == "heuristic_entailed") return Subset::heuristic_entailed;
  if (text == "heuristic_nonentailed") return Subset::heuristic_nonentailed;
  throw FormatError("unknown subset '" + text + "'");
}

std::vector<std::size_t> DiagnosticCase::model_input() const {
  std::vector<std::size_t> input;
  input.reserve(premise.size() + hypothesis.size() + 2);
  input.push_back(vocab::kCls);
  input.insert(input.end(), premise.begin(), premise.end());
  if (!hypothesis.empty()) {
    input.push_back(vocab::kSep);
    input.insert(input.end(), hypothesis.begin(), hypothesis.end());
  }
  return input;
}

bool local_pattern_label(const std::vector<std::size_t>& sequence) {
  for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
    if (sequence[i] == vocab::kBigramA && sequence[i + 1] == vocab::kBigramB) {
      return true;
    }
  }
  return false;
}

namespace {

constexpr std::size_t kLocalLength = 8;

std::vector<std::size_t> random_local_sequence(Rng& rng) {
  std::vector<std::size_t> seq(kLocalLength);
  for (std::size_t& id : seq) {
    id = vocab::kLocalFirst + rng.uniform_int(vocab::kLocalCount);
  }
  return seq;
}

}  // namespace

std::vector<DiagnosticCase> gen_local_pattern_task(std::uint64_t seed,
                                                   std::size_t size) {
  if (size == 0) throw InputError("gen_local_pattern_task: size must be > 0");
  Rng rng = Rng(seed).fork(0x10CA1);
  const std::size_t positives = size - size / 2;
  std::vector<DiagnosticCase> cases;
  cases.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    DiagnosticCase c;
    if (i < positives) {
      c.premise = random_local_sequence(rng);
      const std::size_t at = rng.uniform_int(kLocalLength - 1);
      c.premise[at] = vocab::kBigramA;
      c.premise[at + 1] = vocab::kBigramB;
      c.label = kLabelEntailment;
    } else {
      do {
        c.premise = random_local_sequence(rng);
      } while (local_pattern_label(c.premise));
      c.label = kLabelNonEntailment;
    }
    cases.push_back(std::move(c));
  }
  rng.shuffle(cases);
  return cases;
}

namespace {

struct HansSampler {
  Rng rng;

  std::size_t noun() {
    return vocab::kNounFirst + rng.uniform_int(vocab::kNounCount);
  }
  std::size_t other_noun(std::size_t taken) {
    std::size_t id;
    do {
      id = noun();
    } while (id == taken);
    return id;
  }
  std::size_t verb_trans() {
    return vocab::kVerbTransFirst + rng.uniform_int(vocab::kVerbTransCount);
  }
  std::size_t verb_intrans() {
    return vocab::kVerbIntransFirst +
           rng.uniform_int(vocab::kVerbIntransCount);
  }
  std::size_t other_verb_intrans(std::size_t taken) {
    std::size_t id;
    do {
      id = verb_intrans();
    } while (id == taken);
    return id;
  }
  std::size_t prep() {
    return vocab::kPrepFirst + rng.uniform_int(vocab::kPrepCount);
  }
  std::size_t adverb() {
    return vocab::kAdverbFirst + rng.uniform_int(vocab::kAdverbCount);
  }

  // "N1 P N2 V" entails "N1 V": the modifier never changes the subject.
  DiagnosticCase lexical_overlap_entailed() {
    const std::size_t n1 = noun(), n2 = other_noun(n1);
    const std::size_t v = verb_intrans();
    DiagnosticCase c;
    c.premise = {n1, prep(), n2, v};
    c.hypothesis = {n1, v};
    c.label = kLabelEntailment;
    c.heuristic = Heuristic::lexical_overlap;
    c.subset = Subset::heuristic_entailed;
    return c;
  }

  // Argument swap: "N1 V N2" does not entail "N2 V N1".
  DiagnosticCase lexical_overlap_nonentailed() {
    const std::size_t n1 = noun(), n2 = other_noun(n1);
    const std::size_t v = verb_trans();
    DiagnosticCase c;
    c.premise = {n1, v, n2};
    c.hypothesis = {n2, v, n1};
    c.label = kLabelNonEntailment;
    c.heuristic = Heuristic::lexical_overlap;
    c.subset = Subset::heuristic_nonentailed;
    return c;
  }

  // Dropping a leading adverb keeps the clause true.
  DiagnosticCase subsequence_entailed() {
    const std::size_t n1 = noun(), n2 = other_noun(n1);
    const std::size_t v = verb_trans();
    DiagnosticCase c;
    c.premise = {adverb(), n1, v, n2};
    c.hypothesis = {n1, v, n2};
    c.label = kLabelEntailment;
    c.heuristic = Heuristic::subsequence;
    c.subset = Subset::heuristic_entailed;
    return c;
  }

  // "N1 P N2 V": the contiguous suffix "N2 V" attaches the verb to the
  // wrong subject.
  DiagnosticCase subsequence_nonentailed() {
    const std::size_t n1 = noun(), n2 = other_noun(n1);
    const std::size_t v = verb_intrans();
    DiagnosticCase c;
    c.premise = {n1, prep(), n2, v};
    c.hypothesis = {n2, v};
    c.label = kLabelNonEntailment;
    c.heuristic = Heuristic::subsequence;
    c.subset = Subset::heuristic_nonentailed;
    return c;
  }

  // A conjunct of "C1 and C2" is asserted.
  DiagnosticCase constituent_entailed() {
    const std::size_t n1 = noun(), n2 = other_noun(n1);
    const std::size_t v1 = verb_intrans(), v2 = other_verb_intrans(v1);
    DiagnosticCase c;
    c.premise = {n1, v1, vocab::kAnd, n2, v2};
    c.hypothesis = {n1, v1};
    c.label = kLabelEntailment;
    c.heuristic = Heuristic::constituent;
    c.subset = Subset::heuristic_entailed;
    return c;
  }

  // The antecedent of "if C1 , C2" is not asserted.
  DiagnosticCase constituent_nonentailed() {
    const std::size_t n1 = noun(), n2 = other_noun(n1);
    const std::size_t v1 = verb_intrans(), v2 = other_verb_intrans(v1);
    DiagnosticCase c;
    c.premise = {vocab::kIf, n1, v1, vocab::kComma, n2, v2};
    c.hypothesis = {n1, v1};
    c.label = kLabelNonEntailment;
    c.heuristic = Heuristic::constituent;
    c.subset = Subset::heuristic_nonentailed;
    return c;
  }

  // Heuristic-silent non-entailed filler: the hypothesis repeats a premise
  // clause with a negation inserted, so it is neither all-overlap, nor a
  // contiguous subsequence, nor a grammar constituent.
  DiagnosticCase negation_filler(bool transitive) {
    DiagnosticCase c;
    const std::size_t n1 = noun();
    if (transitive) {
      const std::size_t n2 = other_noun(n1);
      const std::size_t v = verb_trans();
      c.premise = {n1, v, n2};
      c.hypothesis = {n1, vocab::kNot, v, n2};
    } else {
      const std::size_t v = verb_intrans();
      c.premise = {n1, v};
      c.hypothesis = {n1, vocab::kNot, v};
    }
    c.label = kLabelNonEntailment;
    return c;
  }

  // One heuristic-consistent entailed case per entailed template plus one
  // filler each, keeping classes exactly balanced.
  std::vector<DiagnosticCase> biased_block() {
    std::vector<DiagnosticCase> block;
    block.push_back(lexical_overlap_entailed());
    block.push_back(subsequence_entailed());
    block.push_back(constituent_entailed());
    block.push_back(negation_filler(false));
    block.push_back(negation_filler(true));
    block.push_back(negation_filler(rng.uniform_int(2) == 0));
    return block;
  }
};

}  // namespace

HansStyleCorpus gen_hans_style(std::uint64_t seed, std::size_t per_cell) {
  if (per_cell == 0) {
    throw InputError("gen_hans_style: per_cell must be > 0");
  }
  const Rng base(seed);
  HansStyleCorpus corpus;

  HansSampler train{base.fork(1)};
  for (std::size_t i = 0; i < per_cell; ++i) {
    for (DiagnosticCase& c : train.biased_block()) {
      corpus.train.push_back(std::move(c));
    }
  }
  train.rng.shuffle(corpus.train);

  HansSampler dev{base.fork(2)};
  const std::size_t dev_blocks = (per_cell + 3) / 4;
  for (std::size_t i = 0; i < dev_blocks; ++i) {
    for (DiagnosticCase& c : dev.biased_block()) {
      corpus.dev.push_back(std::move(c));
    }
  }
  dev.rng.shuffle(corpus.dev);

  HansSampler diag{base.fork(3)};
  for (std::size_t i = 0; i < per_cell; ++i) {
    corpus.diagnostic.push_back(diag.lexical_overlap_entailed());
    corpus.diagnostic.push_back(diag.lexical_overlap_nonentailed());
    corpus.diagnostic.push_back(diag.subsequence_entailed());
    corpus.diagnostic.push_back(diag.subsequence_nonentailed());
    corpus.diagnostic.push_back(diag.constituent_entailed());
    corpus.diagnostic.push_back(diag.constituent_nonentailed());
  }
  return corpus;
}

namespace {

std::string label_string(const DiagnosticCase& c) {
  if (c.hypothesis.empty()) {
    return c.label == kLabelEntailment ? "positive" : "negative";
  }
  return c.label == kLabelEntailment ? "entailment" : "non_entailment";
}

std::size_t parse_label(const std::string& text, std::size_t line) {
  if (text == "entailment" || text == "positive") return kLabelEntailment;
  if (text == "non_entailment" || text == "negative") {
    return kLabelNonEntailment;
  }
  throw FormatError("line " + std::to_string(line) + ": unknown label '" +
                    text + "'");
}

std::string ids_string(const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<std::size_t> parse_ids(const std::string& text, std::size_t line) {
  std::vector<std::size_t> ids;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      const unsigned long long v = std::stoull(tok);
      if (v >= vocab::kSize) {
        throw FormatError("line " + std::to_string(line) + ": token id " +
                          tok + " outside the vocabulary");
      }
      ids.push_back(static_cast<std::size_t>(v));
    } catch (const std::invalid_argument&) {
      throw FormatError("line " + std::to_string(line) + ": bad token id '" +
                        tok + "'");
    } catch (const std::out_of_range&) {
      throw FormatError("line " + std::to_string(line) + ": bad token id '" +
                        tok + "'");
    }
  }
  return ids;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

void save_corpus(const std::filesystem::path& path,
                 const std::vector<DiagnosticCase>& cases) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const DiagnosticCase& c : cases) {
    out << label_string(c) << '\t' << to_string(c.heuristic) << '\t'
        << to_string(c.subset) << '\t' << ids_string(c.premise) << '\t'
        << ids_string(c.hypothesis) << '\n';
  }
  out.flush();
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<DiagnosticCase> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open corpus: " + path.string());
  std::vector<DiagnosticCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 5) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 5 " +
                        "tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    DiagnosticCase c;
    c.label = parse_label(fields[0], line_no);
    c.heuristic = parse_heuristic(fields[1]);
    c.subset = parse_subset(fields[2]);
    c.premise = parse_ids(fields[3], line_no);
    c.hypothesis = parse_ids(fields[4], line_no);
    if (c.premise.empty()) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": empty premise");
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

namespace {

std::size_t hash_word(const std::string& word) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : word) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  constexpr std::size_t first = 2;
  return first + static_cast<std::size_t>(h % (vocab::kSize - first));
}

std::vector<std::size_t> hash_tokenize(const std::string& sentence) {
  std::vector<std::size_t> ids;
  std::string word;
  for (char ch : sentence) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      word += static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch)));
    } else if (!word.empty()) {
      ids.push_back(hash_word(word));
      word.clear();
    }
  }
  if (!word.empty()) ids.push_back(hash_word(word));
  return ids;
}

}  // namespace

std::vector<DiagnosticCase> load_hans_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open TSV: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("empty TSV: " + path.string());
  }
  const std::vector<std::string> header = split_tabs(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw FormatError("TSV is missing column '" + name + "'");
  };
  const std::size_t col_label = column("gold_label");
  const std::size_t col_heuristic = column("heuristic");
  const std::size_t col_premise = column("sentence1");
  const std::size_t col_hypothesis = column("sentence2");

  std::vector<DiagnosticCase> cases;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() <= std::max({col_label, col_heuristic, col_premise,
                                   col_hypothesis})) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": fewer fields than the header declares");
    }
    DiagnosticCase c;
    const std::string& label = fields[col_label];
    if (label == "entailment") {
      c.label = kLabelEntailment;
    } else if (label == "non-entailment") {
      c.label = kLabelNonEntailment;
    } else {
      throw FormatError("line " + std::to_string(line_no) +
                        ": unknown label '" + label + "'");
    }
    c.heuristic = parse_heuristic(fields[col_heuristic]);
    if (c.heuristic == Heuristic::none) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": unknown heuristic 'none'");
    }
    c.subset = c.label == kLabelEntailment ? Subset::heuristic_entailed
                                           : Subset::heuristic_nonentailed;
    c.premise = hash_tokenize(fields[col_premise]);
    c.hypothesis = hash_tokenize(fields[col_hypothesis]);
    if (c.premise.empty() || c.hypothesis.empty()) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": empty sentence after tokenization");
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

double HeuristicTable::cell(Heuristic h, Subset s) const {
  if (h == Heuristic::none || s == Subset::none) {
    throw InputError("heuristic table: cell lookup needs a tagged case");
  }
  return accuracy[static_cast<std::size_t>(h) - 1]
                 [static_cast<std::size_t>(s) - 1];
}

HeuristicTable score_by_heuristic(const std::vector<std::size_t>& predictions,
                                  const std::vector<DiagnosticCase>& cases) {
  if (predictions.size() != cases.size()) {
    throw InputError("score_by_heuristic: " +
                     std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(cases.size()) +
                     " cases");
  }
  HeuristicTable table;
  std::array<std::array<std::size_t, 2>, 3> correct{};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const DiagnosticCase& c = cases[i];
    if (c.heuristic == Heuristic::none || c.subset == Subset::none) continue;
    const std::size_t hi = static_cast<std::size_t>(c.heuristic) - 1;
    const std::size_t si = static_cast<std::size_t>(c.subset) - 1;
    ++table.count[hi][si];
    if (predictions[i] == c.label) ++correct[hi][si];
  }
  for (std::size_t hi = 0; hi < 3; ++hi) {
    for (std::size_t si = 0; si < 2; ++si) {
      table.accuracy[hi][si] =
          table.count[hi][si] == 0
              ? 0.0
              : static_cast<double>(correct[hi][si]) /
                    static_cast<double>(table.count[hi][si]);
    }
  }
  return table;
}

double accuracy(const std::vector<std::size_t>& predictions,
                const std::vector<DiagnosticCase>& cases) {
  if (predictions.size() != cases.size()) {
    throw InputError("accuracy: " + std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(cases.size()) +
                     " cases");
  }
  if (cases.empty()) throw InputError("accuracy: empty split");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (predictions[i] == cases[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(cases.size());
}

std::string heuristic_table_csv(const HeuristicTable& table) {
  const Heuristic heuristics[] = {Heuristic::lexical_overlap,
                                  Heuristic::subsequence,
                                  Heuristic::constituent};
  const Subset subsets[] = {Subset::heuristic_entailed,
                            Subset::heuristic_nonentailed};
  std::string text = "heuristic,subset,accuracy,count\n";
  char buf[128];
  for (Heuristic h : heuristics) {
    for (Subset s : subsets) {
      const std::size_t hi = static_cast<std::size_t>(h) - 1;
      const std::size_t si = static_cast<std::size_t>(s) - 1;
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%zu\n",
                    to_string(h).c_str(), to_string(s).c_str(),
                    table.accuracy[hi][si], table.count[hi][si]);
      text += buf;
    }
  }
  return text;
}

}  // namespace sesame
