#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sesame/tensor.hpp"

namespace sesame {

// Fixed 64-symbol vocabulary shared by every toy task. Content ids are
// grouped into disjoint role classes; ids 40..55 form the alphabet of the
// local-pattern task.
namespace vocab {
constexpr std::size_t kSep = 0;
constexpr std::size_t kCls = 1;
constexpr std::size_t kNot = 2;
constexpr std::size_t kIf = 3;
constexpr std::size_t kAnd = 4;
constexpr std::size_t kComma = 5;
constexpr std::size_t kNounFirst = 6, kNounCount = 12;
constexpr std::size_t kVerbTransFirst = 18, kVerbTransCount = 8;
constexpr std::size_t kVerbIntransFirst = 26, kVerbIntransCount = 6;
constexpr std::size_t kPrepFirst = 32, kPrepCount = 4;
constexpr std::size_t kAdverbFirst = 36, kAdverbCount = 4;
constexpr std::size_t kLocalFirst = 40, kLocalCount = 16;
constexpr std::size_t kSize = 64;
// The adjacency the local-pattern task detects.
constexpr std::size_t kBigramA = 40, kBigramB = 41;
}  // namespace vocab

constexpr std::size_t kLabelNonEntailment = 0;  // also "negative"
constexpr std::size_t kLabelEntailment = 1;     // also "positive"

enum class Heuristic { none, lexical_overlap, subsequence, constituent };
enum class Subset { none, heuristic_entailed, heuristic_nonentailed };

std::string to_string(Heuristic h);
std::string to_string(Subset s);
Heuristic parse_heuristic(const std::string& text);
Subset parse_subset(const std::string& text);

struct DiagnosticCase {
  std::vector<std::size_t> premise;
  std::vector<std::size_t> hypothesis;  // empty for single-sequence tasks
  std::size_t label = 0;
  Heuristic heuristic = Heuristic::none;
  Subset subset = Subset::none;

  // [CLS] premise ([SEP] hypothesis when present).
  std::vector<std::size_t> model_input() const;
};

// True iff the designated bigram occurs at adjacent positions.
bool local_pattern_label(const std::vector<std::size_t>& sequence);

// Balanced two-class corpus of fixed-length sequences; positives contain the
// designated bigram adjacently, negatives never do. Deterministic per seed.
std::vector<DiagnosticCase> gen_local_pattern_task(std::uint64_t seed,
                                                   std::size_t size);

struct HansStyleCorpus {
  // Biased: heuristic-consistent entailed cases plus heuristic-silent
  // negation fillers; zero heuristic-contradicting cases.
  std::vector<DiagnosticCase> train;
  // Held out from the same biased distribution, for model selection.
  std::vector<DiagnosticCase> dev;
  // per_cell cases for each of the 3 heuristics x 2 subsets.
  std::vector<DiagnosticCase> diagnostic;
};

HansStyleCorpus gen_hans_style(std::uint64_t seed, std::size_t per_cell);

// One case per line:
// label<TAB>heuristic<TAB>subset<TAB>premise ids<TAB>hypothesis ids.
// NLI-style cases use labels entailment/non_entailment; single-sequence
// cases (empty hypothesis) use positive/negative.
void save_corpus(const std::filesystem::path& path,
                 const std::vector<DiagnosticCase>& cases);
std::vector<DiagnosticCase> load_corpus(const std::filesystem::path& path);

// HANS TSV reader: needs the gold_label, heuristic, sentence1 and sentence2
// columns of the published layout. Words are lowercased, split on
// non-alphanumeric characters and hashed into the content-id range; the hash
// tokenizer is exploratory plumbing for poking at real files.
std::vector<DiagnosticCase> load_hans_tsv(const std::filesystem::path& path);

struct HeuristicTable {
  // Indexed [heuristic][subset]: heuristics in enum order (lexical_overlap,
  // subsequence, constituent), subsets (heuristic_entailed,
  // heuristic_nonentailed).
  std::array<std::array<double, 2>, 3> accuracy{};
  std::array<std::array<std::size_t, 2>, 3> count{};

  double cell(Heuristic h, Subset s) const;
};

HeuristicTable score_by_heuristic(const std::vector<std::size_t>& predictions,
                                  const std::vector<DiagnosticCase>& cases);

double accuracy(const std::vector<std::size_t>& predictions,
                const std::vector<DiagnosticCase>& cases);

// CSV with header "heuristic,subset,accuracy,count" and six data rows.
std::string heuristic_table_csv(const HeuristicTable& table);

}  // namespace sesame
