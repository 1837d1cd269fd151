#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "sesame/train.hpp"

namespace sesame {

// Flat `key = value` run configuration. `#` starts a comment, blank lines are
// skipped, unknown or duplicate keys are rejected. Every key has a default;
// defaults applied for absent keys are reported on `notices` one per line.
struct RunConfig {
  TrainConfig train;
  std::string train_data;
  std::string dev_data;
  std::string eval_data;
  std::string out_dir = "out";

  static RunConfig parse(std::istream& in, std::ostream& notices);
  static RunConfig load(const std::filesystem::path& path,
                        std::ostream& notices);

  // Boundary validation for CLI runs; rejects learning_rate <= 0 among the
  // structural checks.
  void validate() const;
  nlohmann::json to_json() const;
};

}  // namespace sesame
