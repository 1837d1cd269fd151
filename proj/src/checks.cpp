#include "sesame/checks.hpp"

#include "sesame/attention.hpp"
#include "sesame/data.hpp"
#include "sesame/encoder.hpp"
#include "sesame/errors.hpp"
#include "sesame/rng.hpp"
#include "sesame/se_fusion.hpp"

namespace sesame {

namespace {

Value mean_square(Value y) { return mean_all(mul(y, y)); }

ParamSet blur_theta() {
  Rng rng(7);
  ParamSet theta;
  theta.emplace_back("input", rng.uniform_tensor({6, 4}, -0.1, 0.1));
  theta.emplace_back("taps", BlurKernel::gaussian(3, 0.5).taps);
  return theta;
}

Value blur_loss(Tape& tape, const ParamSet& theta) {
  Value input = tape.parameter(theta[0].first, theta[0].second);
  Value taps = tape.parameter(theta[1].first, theta[1].second);
  return mean_square(conv1d_same(input, taps));
}

ParamSet attention_theta() {
  Rng rng(11);
  ParamSet theta;
  theta.emplace_back("X", rng.uniform_tensor({6, 8}, -0.1, 0.1));
  theta.emplace_back("Wq", rng.uniform_tensor({8, 8}, -0.1, 0.1));
  theta.emplace_back("bq", rng.uniform_tensor({8}, -0.1, 0.1));
  theta.emplace_back("Wk", rng.uniform_tensor({8, 8}, -0.1, 0.1));
  theta.emplace_back("bk", rng.uniform_tensor({8}, -0.1, 0.1));
  theta.emplace_back("Wv", rng.uniform_tensor({8, 8}, -0.1, 0.1));
  theta.emplace_back("bv", rng.uniform_tensor({8}, -0.1, 0.1));
  return theta;
}

Value attention_loss(Tape& tape, const ParamSet& theta) {
  std::vector<Value> values;
  for (const auto& [name, tensor] : theta) {
    values.push_back(tape.parameter(name, tensor));
  }
  AttentionConfig cfg;
  cfg.l = 6;
  cfg.d = 8;
  cfg.h = 2;
  cfg.blur_mode = BlurMode::on_outputs;
  cfg.k = 3;
  cfg.sigma = 0.5;
  MultiheadValues p{values[1], values[2], values[3],
                    values[4], values[5], values[6]};
  return mean_square(multihead_attention(tape, values[0], p, cfg));
}

ParamSet se_theta() {
  Rng rng(13);
  ParamSet theta;
  theta.emplace_back("U0", rng.uniform_tensor({4, 4}, -0.1, 0.1));
  theta.emplace_back("U1", rng.uniform_tensor({4, 4}, -0.1, 0.1));
  theta.emplace_back("U2", rng.uniform_tensor({4, 4}, -0.1, 0.1));
  theta.emplace_back("U3", rng.uniform_tensor({4, 4}, -0.1, 0.1));
  theta.emplace_back("W1", rng.uniform_tensor({4, 2}, -0.1, 0.1));
  theta.emplace_back("W2", rng.uniform_tensor({2, 4}, -0.1, 0.1));
  return theta;
}

Value se_loss(Tape& tape, const ParamSet& theta) {
  std::vector<Value> layers;
  for (std::size_t i = 0; i < 4; ++i) {
    layers.push_back(tape.parameter(theta[i].first, theta[i].second));
  }
  Value W1 = tape.parameter(theta[4].first, theta[4].second);
  Value W2 = tape.parameter(theta[5].first, theta[5].second);
  Value s = se_excitation(layers, SEValues{W1, W2});
  return mean_square(pool_slices(layers, PoolStrategy::weighted_average, &s));
}

ModelConfig full_model_config() {
  ModelConfig cfg;
  cfg.vocab = 8;
  cfg.l_max = 6;
  cfg.d = 16;
  cfg.h = 2;
  cfg.n_layers = 2;
  cfg.blur_mode = BlurMode::on_outputs;
  cfg.k = 3;
  cfg.sigma = 0.1;
  cfg.se_enabled = true;
  cfg.se_ratio = 2;
  cfg.pooling = PoolStrategy::weighted_average;
  return cfg;
}

ParamSet full_theta() {
  return ModelParams::init(full_model_config(), 17).named;
}

Value full_loss(Tape& tape, const ParamSet& theta) {
  static const ModelConfig cfg = full_model_config();
  ModelParams params;
  params.cfg = cfg;
  params.named = theta;
  TapeModel model = TapeModel::bind(tape, params, true);
  const std::vector<std::size_t> ids = {1, 3, 5, 2, 0, 6};
  return example_loss(model, ids, 1);
}

}  // namespace

GradCheckReport run_scope_check(const std::string& scope, double h,
                                double analytic_offset) {
  if (scope == "blur") {
    return grad_check(blur_loss, blur_theta(), h, analytic_offset);
  }
  if (scope == "attention") {
    return grad_check(attention_loss, attention_theta(), h, analytic_offset);
  }
  if (scope == "se") {
    return grad_check(se_loss, se_theta(), h, analytic_offset);
  }
  if (scope == "full") {
    return grad_check(full_loss, full_theta(), h, analytic_offset);
  }
  throw ConfigError("unknown gradcheck scope '" + scope +
                    "' (expected blur, attention, se, or full)");
}

}  // namespace sesame
