#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sesame/attention.hpp"
#include "sesame/rng.hpp"
#include "sesame/se_fusion.hpp"
#include "sesame/tape.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

struct ModelConfig {
  std::size_t vocab = 64;
  std::size_t l_max = 16;
  std::size_t d = 16;
  std::size_t h = 2;
  std::size_t n_layers = 2;
  std::size_t classes = 2;

  BlurMode blur_mode = BlurMode::none;
  std::size_t k = 3;
  double sigma = 0.1;
  bool normalize_kernel = false;

  bool se_enabled = true;
  std::size_t se_ratio = 2;
  bool se_bias = false;

  PoolStrategy pooling = PoolStrategy::weighted_average;
  bool mean_pool = false;  // false: first-position vector feeds the head

  std::size_t d_ff() const { return 4 * d; }
  std::size_t se_bottleneck() const { return n_layers / se_ratio; }
  AttentionConfig attention_config(std::size_t l) const;
  void validate() const;
};

// Flat, ordered registry of named parameter tensors. Order is the
// construction order and fixes both checkpoint layout and optimizer state
// alignment. Names: embed.token, embed.position, layer<i>.attn.{Wq,bq,Wk,bk,
// Wv,bv,Wo,bo}, layer<i>.ln1.{gain,offset}, layer<i>.ff.{W1,b1,W2,b2},
// layer<i>.ln2.{gain,offset}, se.{W1,W2[,b1,b2]}, head.{W,b}.
struct ModelParams {
  ModelConfig cfg;
  std::vector<std::pair<std::string, Tensor>> named;

  // Truncated normal (std 0.02, resampled beyond 2 std) for weight matrices
  // and embeddings, ones for layer-norm gains, zeros for biases and offsets.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  bool has(std::string_view name) const;
};

// The same registry bound onto a tape, as parameters (trainable) or
// constants (evaluation).
struct TapeModel {
  const ModelConfig* cfg = nullptr;
  std::vector<std::pair<std::string, Value>> named;

  static TapeModel bind(Tape& tape, const ModelParams& params, bool trainable);
  Value get(std::string_view name) const;
};

// Token embedding plus positional embedding, row per input position.
Value embed(Value token_table, Value position_table,
            const std::vector<std::size_t>& ids);
Tensor embed(const Tensor& token_table, const Tensor& position_table,
             const std::vector<std::size_t>& ids);

// (x - row mean) / sqrt(row variance + eps), then gain and offset.
Value layer_norm(Value x, Value gain, Value offset, double eps = 1e-12);
// The normalization alone, for property checks.
Tensor layer_norm_normalize(const Tensor& x, double eps = 1e-12);

// Post-norm encoder layer: LN(X + W_O MHA(X) + b_O), then LN(. + FFN(.)).
Value encoder_layer(Value X, const TapeModel& model, std::size_t layer);
Tensor encoder_layer_forward(const Tensor& X, const ModelParams& params,
                             std::size_t layer);

// All n layer outputs in order, starting from embedded input X0.
std::vector<Value> encoder_stack(Value X0, const TapeModel& model);

struct EncoderStackOutput {
  Tensor U;                          // {l, d, n}
  std::vector<Tensor> layer_outputs; // each {l, d}
};
EncoderStackOutput encoder_stack_forward(const std::vector<std::size_t>& ids,
                                         const ModelParams& params);

// Full head: embed -> stack -> SE/pooling -> position reduction -> logits
// {1, classes}. When excitation_out is non-null it receives the excitation
// weights s ({n}); all ones when SE is disabled.
Value model_logits(const TapeModel& model, const std::vector<std::size_t>& ids,
                   Tensor* excitation_out = nullptr);

// Cross-entropy of the true label under softmax(logits).
Value example_loss(const TapeModel& model, const std::vector<std::size_t>& ids,
                   std::size_t label, Tensor* excitation_out = nullptr);

std::size_t predict(const ModelParams& params,
                    const std::vector<std::size_t>& ids,
                    Tensor* excitation_out = nullptr);

}  // namespace sesame
