#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sesame/tape.hpp"

namespace sesame {

using ParamSet = std::vector<std::pair<std::string, Tensor>>;

// Builds a scalar loss on the given tape. Must register one tape parameter
// per ParamSet entry, taking values from the set, and be a pure function of
// those values.
using LossBuilder = std::function<Value(Tape&, const ParamSet&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t evaluations = 0;
};

// Central differences: (f(x+h) - f(x-h)) / 2h per parameter component.
// Relative error is |analytic - numeric| / max(1, |numeric|); the report
// carries the max over all components. `analytic_offset` is a test hook that
// corrupts every analytic component so detector tests can force a failure.
GradCheckReport grad_check(const LossBuilder& f, const ParamSet& theta,
                           double h = 1e-5, double analytic_offset = 0.0);

}  // namespace sesame
