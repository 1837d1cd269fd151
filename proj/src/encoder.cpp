#include "sesame/encoder.hpp"

#include <algorithm>

#include "sesame/errors.hpp"
#include "sesame/ops.hpp"

namespace sesame {

AttentionConfig ModelConfig::attention_config(std::size_t l) const {
  AttentionConfig a;
  a.l = l;
  a.d = d;
  a.h = h;
  a.blur_mode = blur_mode;
  a.k = k;
  a.sigma = sigma;
  a.normalize_kernel = normalize_kernel;
  return a;
}

void ModelConfig::validate() const {
  if (vocab == 0) throw ConfigError("model: vocab must be >= 1");
  if (l_max == 0) throw ConfigError("model: l_max must be >= 1");
  if (n_layers == 0) throw ConfigError("model: layers must be >= 1");
  if (classes < 2) throw ConfigError("model: classes must be >= 2");
  attention_config(l_max).validate();
  if (se_enabled) {
    if (se_ratio == 0 || n_layers % se_ratio != 0) {
      throw ConfigError("model: layers = " + std::to_string(n_layers) +
                        " is not divisible by se_ratio = " +
                        std::to_string(se_ratio));
    }
  }
  if (pooling == PoolStrategy::sum_last_four && n_layers < 4) {
    throw ConfigError("model: pooling 'sum_last_four' needs 4 layers, have " +
                      std::to_string(n_layers));
  }
  if ((pooling == PoolStrategy::second ||
       pooling == PoolStrategy::second_to_last) &&
      n_layers < 2) {
    throw ConfigError("model: pooling '" + to_string(pooling) +
                      "' needs 2 layers, have " + std::to_string(n_layers));
  }
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  constexpr double kStd = 0.02;
  ModelParams p;
  p.cfg = cfg;
  auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
    p.named.emplace_back(std::move(name),
                         rng.truncated_normal_tensor({rows, cols}, kStd));
  };
  auto zeros = [&](std::string name, std::size_t len) {
    p.named.emplace_back(std::move(name), Tensor({len}));
  };
  auto ones = [&](std::string name, std::size_t len) {
    p.named.emplace_back(std::move(name), Tensor::full({len}, 1.0));
  };

  weight("embed.token", cfg.vocab, cfg.d);
  weight("embed.position", cfg.l_max, cfg.d);
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    weight(prefix + ".attn.Wq", cfg.d, cfg.d);
    zeros(prefix + ".attn.bq", cfg.d);
    weight(prefix + ".attn.Wk", cfg.d, cfg.d);
    zeros(prefix + ".attn.bk", cfg.d);
    weight(prefix + ".attn.Wv", cfg.d, cfg.d);
    zeros(prefix + ".attn.bv", cfg.d);
    weight(prefix + ".attn.Wo", cfg.d, cfg.d);
    zeros(prefix + ".attn.bo", cfg.d);
    ones(prefix + ".ln1.gain", cfg.d);
    zeros(prefix + ".ln1.offset", cfg.d);
    weight(prefix + ".ff.W1", cfg.d, cfg.d_ff());
    zeros(prefix + ".ff.b1", cfg.d_ff());
    weight(prefix + ".ff.W2", cfg.d_ff(), cfg.d);
    zeros(prefix + ".ff.b2", cfg.d);
    ones(prefix + ".ln2.gain", cfg.d);
    zeros(prefix + ".ln2.offset", cfg.d);
  }
  if (cfg.se_enabled) {
    weight("se.W1", cfg.n_layers, cfg.se_bottleneck());
    weight("se.W2", cfg.se_bottleneck(), cfg.n_layers);
    if (cfg.se_bias) {
      zeros("se.b1", cfg.se_bottleneck());
      zeros("se.b2", cfg.n_layers);
    }
  }
  weight("head.W", cfg.d, cfg.classes);
  zeros("head.b", cfg.classes);
  return p;
}

namespace {

template <typename Registry>
auto* find_named(Registry& named, std::string_view name) {
  for (auto& entry : named) {
    if (entry.first == name) return &entry.second;
  }
  return static_cast<decltype(&named.front().second)>(nullptr);
}

}  // namespace

const Tensor& ModelParams::get(std::string_view name) const {
  if (const Tensor* t = find_named(named, name)) return *t;
  throw Error("model: no parameter named '" + std::string(name) + "'");
}

Tensor& ModelParams::get(std::string_view name) {
  if (Tensor* t = find_named(named, name)) return *t;
  throw Error("model: no parameter named '" + std::string(name) + "'");
}

bool ModelParams::has(std::string_view name) const {
  return find_named(named, name) != nullptr;
}

TapeModel TapeModel::bind(Tape& tape, const ModelParams& params,
                          bool trainable) {
  TapeModel model;
  model.cfg = &params.cfg;
  for (const auto& [name, tensor] : params.named) {
    Value v = trainable ? tape.parameter(name, tensor) : tape.constant(tensor);
    model.named.emplace_back(name, v);
  }
  return model;
}

Value TapeModel::get(std::string_view name) const {
  if (const Value* v = find_named(named, name)) return *v;
  throw Error("model: no parameter named '" + std::string(name) + "'");
}

Value embed(Value token_table, Value position_table,
            const std::vector<std::size_t>& ids) {
  if (ids.empty()) throw InputError("embed: empty token sequence");
  const std::size_t l_max = position_table.shape()[0];
  if (ids.size() > l_max) {
    throw InputError("embed: sequence length " + std::to_string(ids.size()) +
                     " exceeds l_max " + std::to_string(l_max));
  }
  std::vector<std::size_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  return add(gather_rows(token_table, ids),
             gather_rows(position_table, positions));
}

Tensor embed(const Tensor& token_table, const Tensor& position_table,
             const std::vector<std::size_t>& ids) {
  Tape tape;
  return embed(tape.constant(token_table), tape.constant(position_table), ids)
      .tensor();
}

Value layer_norm(Value x, Value gain, Value offset, double eps) {
  Value centered = add_col_scalar(x, scale(row_mean(x), -1.0));
  Value variance = row_mean(mul(centered, centered));
  Value normalized = mul_col_scalar(centered, rsqrt_shifted(variance, eps));
  return add_row_vector(mul_row_vector(normalized, gain), offset);
}

Tensor layer_norm_normalize(const Tensor& x, double eps) {
  Tape tape;
  Value v = tape.constant(x);
  Value centered = add_col_scalar(v, scale(row_mean(v), -1.0));
  Value variance = row_mean(mul(centered, centered));
  return mul_col_scalar(centered, rsqrt_shifted(variance, eps)).tensor();
}

namespace {

MultiheadValues attention_values(const TapeModel& model,
                                 const std::string& prefix) {
  return MultiheadValues{
      model.get(prefix + ".attn.Wq"), model.get(prefix + ".attn.bq"),
      model.get(prefix + ".attn.Wk"), model.get(prefix + ".attn.bk"),
      model.get(prefix + ".attn.Wv"), model.get(prefix + ".attn.bv")};
}

}  // namespace

Value encoder_layer(Value X, const TapeModel& model, std::size_t layer) {
  const ModelConfig& cfg = *model.cfg;
  if (layer >= cfg.n_layers) {
    throw Error("encoder_layer: layer " + std::to_string(layer) +
                " out of range");
  }
  const std::string prefix = "layer" + std::to_string(layer);
  Tape& tape = *X.tape();
  const AttentionConfig attn_cfg = cfg.attention_config(X.shape()[0]);

  Value mha = multihead_attention(tape, X, attention_values(model, prefix),
                                  attn_cfg);
  Value projected = add_row_vector(matmul(mha, model.get(prefix + ".attn.Wo")),
                                   model.get(prefix + ".attn.bo"));
  Value y = layer_norm(add(X, projected), model.get(prefix + ".ln1.gain"),
                       model.get(prefix + ".ln1.offset"));

  Value hidden = relu(add_row_vector(matmul(y, model.get(prefix + ".ff.W1")),
                                     model.get(prefix + ".ff.b1")));
  Value ff = add_row_vector(matmul(hidden, model.get(prefix + ".ff.W2")),
                            model.get(prefix + ".ff.b2"));
  return layer_norm(add(y, ff), model.get(prefix + ".ln2.gain"),
                    model.get(prefix + ".ln2.offset"));
}

Tensor encoder_layer_forward(const Tensor& X, const ModelParams& params,
                             std::size_t layer) {
  Tape tape;
  TapeModel model = TapeModel::bind(tape, params, false);
  return encoder_layer(tape.constant(X), model, layer).tensor();
}

std::vector<Value> encoder_stack(Value X0, const TapeModel& model) {
  std::vector<Value> outputs;
  Value x = X0;
  for (std::size_t layer = 0; layer < model.cfg->n_layers; ++layer) {
    x = encoder_layer(x, model, layer);
    outputs.push_back(x);
  }
  return outputs;
}

EncoderStackOutput encoder_stack_forward(const std::vector<std::size_t>& ids,
                                         const ModelParams& params) {
  Tape tape;
  TapeModel model = TapeModel::bind(tape, params, false);
  Value x0 = embed(model.get("embed.token"), model.get("embed.position"), ids);
  EncoderStackOutput out;
  for (Value v : encoder_stack(x0, model)) {
    out.layer_outputs.push_back(v.tensor());
  }
  out.U = stack_layers(out.layer_outputs);
  return out;
}

namespace {

Value pooled_representation(const TapeModel& model,
                            const std::vector<Value>& layers,
                            Tensor* excitation_out) {
  const ModelConfig& cfg = *model.cfg;
  if (cfg.se_enabled) {
    SEValues se{model.get("se.W1"), model.get("se.W2")};
    Value b1, b2;
    if (cfg.se_bias) {
      b1 = model.get("se.b1");
      b2 = model.get("se.b2");
      se.b1 = &b1;
      se.b2 = &b2;
    }
    Value s = se_excitation(layers, se);
    if (excitation_out) {
      *excitation_out = ops::reshape(s.tensor(), {cfg.n_layers});
    }
    return pool_slices(layers, cfg.pooling, &s);
  }
  if (excitation_out) *excitation_out = Tensor::full({cfg.n_layers}, 1.0);
  return pool_slices(layers, cfg.pooling, nullptr);
}

}  // namespace

Value model_logits(const TapeModel& model, const std::vector<std::size_t>& ids,
                   Tensor* excitation_out) {
  const ModelConfig& cfg = *model.cfg;
  Value x0 = embed(model.get("embed.token"), model.get("embed.position"), ids);
  std::vector<Value> layers = encoder_stack(x0, model);
  Value pooled = pooled_representation(model, layers, excitation_out);
  Value vec = cfg.mean_pool
                  ? reshape(row_mean(transpose(pooled)), {std::size_t{1}, cfg.d})
                  : reshape(take_row(pooled, 0), {std::size_t{1}, cfg.d});
  return add_row_vector(matmul(vec, model.get("head.W")), model.get("head.b"));
}

Value example_loss(const TapeModel& model, const std::vector<std::size_t>& ids,
                   std::size_t label, Tensor* excitation_out) {
  const ModelConfig& cfg = *model.cfg;
  if (label >= cfg.classes) {
    throw InputError("example_loss: label " + std::to_string(label) +
                     " out of range for " + std::to_string(cfg.classes) +
                     " classes");
  }
  Value logits = model_logits(model, ids, excitation_out);
  Value probabilities = softmax_rows(logits);
  return scale(log(pick(probabilities, label)), -1.0);
}

std::size_t predict(const ModelParams& params,
                    const std::vector<std::size_t>& ids,
                    Tensor* excitation_out) {
  Tape tape;
  TapeModel model = TapeModel::bind(tape, params, false);
  const Tensor logits = model_logits(model, ids, excitation_out).tensor();
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

}  // namespace sesame
