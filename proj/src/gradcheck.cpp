#include "sesame/gradcheck.hpp"

#include <cmath>
#include <map>

#include "sesame/errors.hpp"

namespace sesame {

namespace {

double evaluate(const LossBuilder& f, const ParamSet& theta,
                const std::string& context) {
  Tape tape;
  Value loss = f(tape, theta);
  if (loss.size() != 1) {
    throw DimensionError("grad_check: loss must be a scalar, got " +
                         loss.tensor().shape_str());
  }
  const double value = loss.tensor()[0];
  if (!std::isfinite(value)) {
    throw EvaluationError("grad_check: non-finite loss", context);
  }
  return value;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& f, const ParamSet& theta,
                           double h, double analytic_offset) {
  if (h <= 0.0) throw ConfigError("grad_check: step h must be positive");

  Tape tape;
  Value loss = f(tape, theta);
  if (loss.size() != 1) {
    throw DimensionError("grad_check: loss must be a scalar, got " +
                         loss.tensor().shape_str());
  }
  if (!std::isfinite(loss.tensor()[0])) {
    throw EvaluationError("grad_check: non-finite loss", "<unperturbed>");
  }
  tape.backward(loss);

  std::map<std::string, Tensor> analytic;
  for (const auto& [name, value] : tape.parameters()) {
    analytic.emplace(name, tape.grad(value));
  }

  GradCheckReport report;
  ParamSet work = theta;
  for (std::size_t p = 0; p < work.size(); ++p) {
    const std::string& name = work[p].first;
    auto found = analytic.find(name);
    if (found == analytic.end()) {
      throw Error("grad_check: builder never registered parameter '" + name +
                  "'");
    }
    const Tensor& grad = found->second;
    Tensor& t = work[p].second;
    if (grad.size() != t.size()) {
      throw DimensionError("grad_check: gradient shape " + grad.shape_str() +
                           " does not match parameter '" + name + "' shape " +
                           t.shape_str());
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string context = name + "[" + std::to_string(i) + "]";
      const double original = t[i];
      t[i] = original + h;
      const double plus = evaluate(f, work, context);
      t[i] = original - h;
      const double minus = evaluate(f, work, context);
      t[i] = original;
      report.evaluations += 2;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = grad[i] + analytic_offset;
      const double rel =
          std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      if (rel >= report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace sesame
