#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "sesame/data.hpp"
#include "sesame/tensor.hpp"

using namespace sesame;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "sesame_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

bool same_case(const DiagnosticCase& a, const DiagnosticCase& b) {
  return a.label == b.label && a.heuristic == b.heuristic &&
         a.subset == b.subset && a.premise == b.premise &&
         a.hypothesis == b.hypothesis;
}

bool same_corpus(const std::vector<DiagnosticCase>& a,
                 const std::vector<DiagnosticCase>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_case(a[i], b[i])) return false;
  }
  return true;
}

bool token_subset(const std::vector<std::size_t>& hyp,
                  const std::vector<std::size_t>& prem) {
  std::set<std::size_t> bag(prem.begin(), prem.end());
  return std::all_of(hyp.begin(), hyp.end(),
                     [&](std::size_t id) { return bag.count(id) > 0; });
}

bool contiguous_in(const std::vector<std::size_t>& hyp,
                   const std::vector<std::size_t>& prem) {
  if (hyp.empty() || hyp.size() > prem.size()) return false;
  return std::search(prem.begin(), prem.end(), hyp.begin(), hyp.end()) !=
         prem.end();
}

}  // namespace

TEST_CASE("local pattern label detects exactly the adjacent bigram") {
  CHECK(local_pattern_label({vocab::kBigramA, vocab::kBigramB}));
  CHECK(local_pattern_label({vocab::kBigramA, vocab::kBigramB, 50, 51}));
  CHECK(local_pattern_label({50, 51, vocab::kBigramA, vocab::kBigramB}));
  CHECK_FALSE(local_pattern_label({vocab::kBigramB, vocab::kBigramA}));
  CHECK_FALSE(
      local_pattern_label({vocab::kBigramA, 50, vocab::kBigramB}));
  CHECK_FALSE(local_pattern_label({vocab::kBigramA}));
  CHECK_FALSE(local_pattern_label({}));
}

TEST_CASE("local pattern corpus is balanced and correctly labeled") {
  std::vector<DiagnosticCase> cases = gen_local_pattern_task(0, 1000);
  REQUIRE(cases.size() == 1000);
  std::size_t positives = 0;
  for (const DiagnosticCase& c : cases) {
    CHECK(c.premise.size() == 8);
    CHECK(c.hypothesis.empty());
    CHECK(c.heuristic == Heuristic::none);
    for (std::size_t id : c.premise) {
      CHECK(id >= vocab::kLocalFirst);
      CHECK(id < vocab::kLocalFirst + vocab::kLocalCount);
    }
    CHECK(c.label == (local_pattern_label(c.premise) ? kLabelEntailment
                                                     : kLabelNonEntailment));
    if (c.label == kLabelEntailment) ++positives;
  }
  CHECK(positives == 500);
}

TEST_CASE("local pattern corpus is deterministic per seed") {
  CHECK(same_corpus(gen_local_pattern_task(42, 64),
                    gen_local_pattern_task(42, 64)));
  CHECK_FALSE(same_corpus(gen_local_pattern_task(42, 64),
                          gen_local_pattern_task(43, 64)));
  CHECK_THROWS_AS(gen_local_pattern_task(0, 0), InputError);
}

TEST_CASE("biased split never contradicts a heuristic") {
  HansStyleCorpus corpus = gen_hans_style(11, 16);
  CHECK(corpus.train.size() == 96);
  CHECK(corpus.dev.size() == 24);

  for (const std::vector<DiagnosticCase>* split :
       {&corpus.train, &corpus.dev}) {
    std::size_t entailed = 0;
    for (const DiagnosticCase& c : *split) {
      if (c.heuristic != Heuristic::none) {
        // Heuristic-tagged training cases are always the entailed kind.
        CHECK(c.label == kLabelEntailment);
        CHECK(c.subset == Subset::heuristic_entailed);
        CHECK(token_subset(c.hypothesis, c.premise));
      } else {
        // Fillers: negated restatement, silent on every heuristic.
        CHECK(c.label == kLabelNonEntailment);
        CHECK(std::count(c.hypothesis.begin(), c.hypothesis.end(),
                         vocab::kNot) == 1);
        CHECK_FALSE(token_subset(c.hypothesis, c.premise));
        CHECK_FALSE(contiguous_in(c.hypothesis, c.premise));
      }
      if (c.label == kLabelEntailment) ++entailed;
    }
    CHECK(entailed * 2 == split->size());
  }
}

TEST_CASE("diagnostic set fills every heuristic cell and matches patterns") {
  const std::size_t per_cell = 16;
  HansStyleCorpus corpus = gen_hans_style(11, per_cell);
  REQUIRE(corpus.diagnostic.size() == 6 * per_cell);

  std::size_t counts[3][2] = {};
  for (const DiagnosticCase& c : corpus.diagnostic) {
    REQUIRE(c.heuristic != Heuristic::none);
    REQUIRE(c.subset != Subset::none);
    ++counts[static_cast<std::size_t>(c.heuristic) - 1]
            [static_cast<std::size_t>(c.subset) - 1];
    const bool entailed = c.subset == Subset::heuristic_entailed;
    CHECK(c.label == (entailed ? kLabelEntailment : kLabelNonEntailment));
    // Every diagnostic case satisfies the word-overlap heuristic by design.
    CHECK(token_subset(c.hypothesis, c.premise));
    switch (c.heuristic) {
      case Heuristic::lexical_overlap:
        // Overlap without contiguity: order is changed or tokens skipped.
        CHECK_FALSE(contiguous_in(c.hypothesis, c.premise));
        break;
      case Heuristic::subsequence:
        CHECK(contiguous_in(c.hypothesis, c.premise));
        break;
      case Heuristic::constituent:
        CHECK(contiguous_in(c.hypothesis, c.premise));
        if (entailed) {
          CHECK(std::count(c.premise.begin(), c.premise.end(), vocab::kAnd) ==
                1);
        } else {
          CHECK(c.premise.front() == vocab::kIf);
        }
        break;
      case Heuristic::none:
        break;
    }
  }
  for (std::size_t hi = 0; hi < 3; ++hi) {
    for (std::size_t si = 0; si < 2; ++si) {
      CHECK(counts[hi][si] == per_cell);
    }
  }
}

TEST_CASE("hans-style generation is deterministic per seed") {
  HansStyleCorpus a = gen_hans_style(7, 4);
  HansStyleCorpus b = gen_hans_style(7, 4);
  CHECK(same_corpus(a.train, b.train));
  CHECK(same_corpus(a.dev, b.dev));
  CHECK(same_corpus(a.diagnostic, b.diagnostic));
  HansStyleCorpus c = gen_hans_style(8, 4);
  CHECK_FALSE(same_corpus(a.train, c.train));
  CHECK_THROWS_AS(gen_hans_style(7, 0), InputError);
}

TEST_CASE("model input prepends CLS and separates with SEP") {
  DiagnosticCase nli;
  nli.premise = {6, 18, 7};
  nli.hypothesis = {7, 18, 6};
  CHECK(nli.model_input() ==
        std::vector<std::size_t>{vocab::kCls, 6, 18, 7, vocab::kSep, 7, 18,
                                 6});

  DiagnosticCase single;
  single.premise = {40, 41, 50};
  CHECK(single.model_input() ==
        std::vector<std::size_t>{vocab::kCls, 40, 41, 50});
}

TEST_CASE("corpus files round trip exactly") {
  HansStyleCorpus corpus = gen_hans_style(3, 2);
  std::vector<DiagnosticCase> cases = corpus.diagnostic;
  std::vector<DiagnosticCase> local = gen_local_pattern_task(3, 4);
  cases.insert(cases.end(), local.begin(), local.end());

  fs::path path = temp_file("roundtrip.tsv");
  save_corpus(path, cases);
  CHECK(same_corpus(load_corpus(path), cases));

  // Single-sequence rows use positive/negative, NLI rows entailment labels.
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first.find("ntailment\t") != std::string::npos);
  std::string line;
  std::size_t single_rows = 0;
  in.clear();
  in.seekg(0);
  while (std::getline(in, line)) {
    if (line.rfind("positive\t", 0) == 0 || line.rfind("negative\t", 0) == 0) {
      ++single_rows;
      CHECK(line.back() == '\t');  // empty hypothesis field
    }
  }
  CHECK(single_rows == 4);
}

TEST_CASE("corpus loader reports malformed lines by number") {
  fs::path path = temp_file("bad.tsv");

  write_text(path, "entailment\tnone\tnone\t1 2 3\t\nonly\ttwo\n");
  try {
    load_corpus(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  write_text(path, "maybe\tnone\tnone\t1 2\t\n");
  try {
    load_corpus(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 1") != std::string::npos);
    CHECK(msg.find("maybe") != std::string::npos);
  }

  write_text(path, "positive\tnone\tnone\t1 64 2\t\n");
  try {
    load_corpus(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("outside the vocabulary") !=
          std::string::npos);
  }

  write_text(path, "positive\tnone\tnone\t1 abc\t\n");
  CHECK_THROWS_AS(load_corpus(path), FormatError);

  write_text(path, "positive\tnone\tnone\t\t\n");
  CHECK_THROWS_AS(load_corpus(path), FormatError);

  write_text(path, "positive\tupside_down\tnone\t1 2\t\n");
  CHECK_THROWS_AS(load_corpus(path), FormatError);

  CHECK_THROWS_AS(load_corpus(temp_file("does_not_exist.tsv")), FormatError);
}

TEST_CASE("hans TSV reader maps published columns") {
  fs::path path = temp_file("hans.tsv");
  write_text(path,
             "pairID\tgold_label\tsentence1\tsentence2\theuristic\n"
             "ex0\tentailment\tThe doctor saw the lawyer .\tThe doctor saw "
             "the lawyer\tlexical_overlap\n"
             "ex1\tnon-entailment\tIf the artist slept , the judge "
             "laughed\tThe artist slept\tconstituent\n");
  std::vector<DiagnosticCase> cases = load_hans_tsv(path);
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].label == kLabelEntailment);
  CHECK(cases[0].heuristic == Heuristic::lexical_overlap);
  CHECK(cases[0].subset == Subset::heuristic_entailed);
  CHECK(cases[1].label == kLabelNonEntailment);
  CHECK(cases[1].heuristic == Heuristic::constituent);
  CHECK(cases[1].subset == Subset::heuristic_nonentailed);
  // "the doctor saw the lawyer" lowercased, split, hashed: 5 words, the
  // repeated word hashes identically, ids stay inside the vocabulary.
  CHECK(cases[0].hypothesis.size() == 5);
  CHECK(cases[0].hypothesis[0] == cases[0].hypothesis[3]);
  CHECK(cases[0].premise.size() == 5);  // trailing "." is not alphanumeric
  CHECK(cases[0].premise == cases[0].hypothesis);
  for (std::size_t id : cases[1].premise) CHECK(id < vocab::kSize);

  write_text(path,
             "gold_label\tsentence1\theuristic\n"
             "entailment\tThe doctor saw the lawyer\tlexical_overlap\n");
  try {
    load_hans_tsv(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("sentence2") != std::string::npos);
  }

  write_text(path,
             "gold_label\theuristic\tsentence1\tsentence2\n"
             "entailment\tsubsequence\tThe doctor slept\tThe doctor\n"
             "neutral\tsubsequence\tThe doctor slept\tThe doctor\n");
  try {
    load_hans_tsv(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("neutral") != std::string::npos);
  }
}

TEST_CASE("heuristic table scores each cell independently") {
  HansStyleCorpus corpus = gen_hans_style(3, 2);
  const std::vector<DiagnosticCase>& diag = corpus.diagnostic;
  REQUIRE(diag.size() == 12);

  std::vector<std::size_t> oracle;
  for (const DiagnosticCase& c : diag) oracle.push_back(c.label);
  HeuristicTable perfect = score_by_heuristic(oracle, diag);
  for (Heuristic h : {Heuristic::lexical_overlap, Heuristic::subsequence,
                      Heuristic::constituent}) {
    CHECK(perfect.cell(h, Subset::heuristic_entailed) == 1.0);
    CHECK(perfect.cell(h, Subset::heuristic_nonentailed) == 1.0);
  }
  for (auto& row : perfect.count) {
    CHECK(row[0] == 2);
    CHECK(row[1] == 2);
  }

  // A model that always answers "entailment" aces the entailed cells and
  // scores zero on the non-entailed ones.
  std::vector<std::size_t> always(diag.size(), kLabelEntailment);
  HeuristicTable biased = score_by_heuristic(always, diag);
  for (Heuristic h : {Heuristic::lexical_overlap, Heuristic::subsequence,
                      Heuristic::constituent}) {
    CHECK(biased.cell(h, Subset::heuristic_entailed) == 1.0);
    CHECK(biased.cell(h, Subset::heuristic_nonentailed) == 0.0);
  }

  // Flip one of the two lexical_overlap entailed answers: that cell halves.
  std::vector<std::size_t> half = oracle;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    if (diag[i].heuristic == Heuristic::lexical_overlap &&
        diag[i].subset == Subset::heuristic_entailed) {
      half[i] = 1 - half[i];
      break;
    }
  }
  HeuristicTable halved = score_by_heuristic(half, diag);
  CHECK(halved.cell(Heuristic::lexical_overlap, Subset::heuristic_entailed) ==
        0.5);
  CHECK(halved.cell(Heuristic::subsequence, Subset::heuristic_entailed) ==
        1.0);

  CHECK_THROWS_AS(score_by_heuristic({0, 1}, diag), InputError);
  CHECK_THROWS_AS(perfect.cell(Heuristic::none, Subset::heuristic_entailed),
                  InputError);
}

TEST_CASE("split accuracy and table CSV") {
  std::vector<DiagnosticCase> cases = gen_local_pattern_task(9, 10);
  std::vector<std::size_t> right, wrong;
  for (const DiagnosticCase& c : cases) {
    right.push_back(c.label);
    wrong.push_back(1 - c.label);
  }
  CHECK(accuracy(right, cases) == 1.0);
  CHECK(accuracy(wrong, cases) == 0.0);
  CHECK_THROWS_AS(accuracy({}, cases), InputError);
  CHECK_THROWS_AS(accuracy({}, {}), InputError);

  HansStyleCorpus corpus = gen_hans_style(3, 2);
  std::vector<std::size_t> always(corpus.diagnostic.size(), kLabelEntailment);
  std::string csv =
      heuristic_table_csv(score_by_heuristic(always, corpus.diagnostic));
  CHECK(csv.rfind("heuristic,subset,accuracy,count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(csv.find("lexical_overlap,heuristic_entailed,1,2\n") !=
        std::string::npos);
  CHECK(csv.find("constituent,heuristic_nonentailed,0,2\n") !=
        std::string::npos);
}
