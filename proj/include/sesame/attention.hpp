#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sesame/tape.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

enum class BlurMode { none, on_outputs, on_values };

std::string to_string(BlurMode mode);
BlurMode parse_blur_mode(const std::string& text);

struct AttentionConfig {
  std::size_t l = 0;
  std::size_t d = 0;
  std::size_t h = 1;
  BlurMode blur_mode = BlurMode::none;
  std::size_t k = 3;
  double sigma = 0.1;
  bool normalize_kernel = false;

  std::size_t head_dim() const { return d / h; }
  void validate() const;  // throws ConfigError on any violated invariant
};

// Unnormalized Gaussian taps: taps[x] = exp(-(x - k/2)^2 / (2 sigma^2)).
// The center tap is exactly 1. normalize divides by the tap sum.
struct BlurKernel {
  Tensor taps;

  std::size_t k() const { return taps.dim(0); }
  static BlurKernel gaussian(std::size_t k, double sigma,
                             bool normalize = false);
};

struct AttentionResult {
  Tensor O;                       // {l, d}: heads concatenated in index order
  std::vector<Tensor> A_per_head; // each {l, l}
  std::vector<Tensor> O_per_head; // each {l, d/h}, blur already applied
};

// A = softmax(Q K^T / sqrt(d')), O = A V, where d' is Q's column count.
std::pair<Tensor, Tensor> scaled_dot_attention(const Tensor& Q,
                                               const Tensor& K,
                                               const Tensor& V);

Tensor blur_on_outputs(const Tensor& O_head, const BlurKernel& kernel);
Tensor blur_on_values(const Tensor& V_head, const Tensor& A,
                      const BlurKernel& kernel);

struct MultiheadParams {
  Tensor Wq, bq, Wk, bk, Wv, bv;  // weights {d, d}, biases {d}

  static MultiheadParams zero_bias(Tensor Wq, Tensor Wk, Tensor Wv);
};

AttentionResult multihead_attention(const Tensor& X, const MultiheadParams& p,
                                    const AttentionConfig& cfg);

struct MultiheadValues {
  Value Wq, bq, Wk, bk, Wv, bv;
};

struct AttentionHeadValues {
  std::vector<Value> A;
  std::vector<Value> O;
};

Value multihead_attention(Tape& tape, Value X, const MultiheadValues& p,
                          const AttentionConfig& cfg,
                          AttentionHeadValues* heads = nullptr);

}  // namespace sesame
