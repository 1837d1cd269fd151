#pragma once

#include <string>

#include "sesame/gradcheck.hpp"

namespace sesame {

// Named gradient-check scenarios behind the gradcheck command.
//   blur:      convolved random input, loss = mean square, taps included
//   attention: multihead attention with blur on outputs
//   se:        squeeze -> excite -> weighted average over random layer maps
//   full:      whole-model cross-entropy (n=2, l=6, d=16, h=2,
//              blur on_outputs, k=3, sigma=0.1, SE on)
// `analytic_offset` corrupts the analytic gradients (detector test hook).
GradCheckReport run_scope_check(const std::string& scope, double h = 1e-5,
                                double analytic_offset = 0.0);

}  // namespace sesame
