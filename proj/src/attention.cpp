#include "sesame/attention.hpp"

#include <cmath>

#include "sesame/errors.hpp"
#include "sesame/ops.hpp"

namespace sesame {

std::string to_string(BlurMode mode) {
  switch (mode) {
    case BlurMode::none: return "none";
    case BlurMode::on_outputs: return "on_outputs";
    case BlurMode::on_values: return "on_values";
  }
  throw ConfigError("unknown blur mode value");
}

BlurMode parse_blur_mode(const std::string& text) {
  if (text == "none") return BlurMode::none;
  if (text == "on_outputs") return BlurMode::on_outputs;
  if (text == "on_values") return BlurMode::on_values;
  throw ConfigError("unknown blur_mode '" + text +
                    "' (expected none, on_outputs, or on_values)");
}

void AttentionConfig::validate() const {
  if (l == 0) throw ConfigError("attention: sequence length l must be >= 1");
  if (d == 0) throw ConfigError("attention: model dimension d must be >= 1");
  if (h == 0) throw ConfigError("attention: head count h must be >= 1");
  if (d % h != 0) {
    throw ConfigError("attention: d = " + std::to_string(d) +
                      " is not divisible by h = " + std::to_string(h));
  }
  if (k % 2 == 0 || k == 0) {
    throw ConfigError("attention: window k = " + std::to_string(k) +
                      " must be odd and >= 1");
  }
  if (k > l) {
    throw ConfigError("attention: window k = " + std::to_string(k) +
                      " exceeds sequence length l = " + std::to_string(l));
  }
  if (!(sigma > 0.0)) {
    throw ConfigError("attention: sigma must be > 0");
  }
}

BlurKernel BlurKernel::gaussian(std::size_t k, double sigma, bool normalize) {
  if (k == 0 || k % 2 == 0) {
    throw ConfigError("gaussian_kernel: k = " + std::to_string(k) +
                      " must be odd and >= 1");
  }
  if (!(sigma > 0.0)) {
    throw ConfigError("gaussian_kernel: sigma must be > 0");
  }
  const double center = static_cast<double>(k / 2);
  Tensor taps({k});
  double sum = 0.0;
  for (std::size_t x = 0; x < k; ++x) {
    const double offset = static_cast<double>(x) - center;
    taps[x] = std::exp(-(offset * offset) / (2.0 * sigma * sigma));
    sum += taps[x];
  }
  if (normalize) {
    for (std::size_t x = 0; x < k; ++x) taps[x] /= sum;
  }
  return BlurKernel{std::move(taps)};
}

std::pair<Tensor, Tensor> scaled_dot_attention(const Tensor& Q,
                                               const Tensor& K,
                                               const Tensor& V) {
  if (Q.rank() != 2 || !Q.same_shape(K) || !K.same_shape(V)) {
    throw DimensionError("scaled_dot_attention: Q " + Q.shape_str() + ", K " +
                         K.shape_str() + ", V " + V.shape_str() +
                         " must share one l x d' shape");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(Q.dim(1)));
  Tensor A = ops::softmax_rows(
      ops::scale(ops::matmul(Q, ops::transpose(K)), inv_sqrt));
  Tensor O = ops::matmul(A, V);
  return {std::move(A), std::move(O)};
}

Tensor blur_on_outputs(const Tensor& O_head, const BlurKernel& kernel) {
  return ops::conv1d_same(O_head, kernel.taps);
}

Tensor blur_on_values(const Tensor& V_head, const Tensor& A,
                      const BlurKernel& kernel) {
  return ops::matmul(A, ops::conv1d_same(V_head, kernel.taps));
}

MultiheadParams MultiheadParams::zero_bias(Tensor Wq, Tensor Wk, Tensor Wv) {
  const std::size_t d = Wq.dim(1);
  return MultiheadParams{std::move(Wq), Tensor({d}), std::move(Wk),
                         Tensor({d}), std::move(Wv), Tensor({d})};
}

AttentionResult multihead_attention(const Tensor& X, const MultiheadParams& p,
                                    const AttentionConfig& cfg) {
  Tape tape;
  MultiheadValues values{tape.constant(p.Wq), tape.constant(p.bq),
                         tape.constant(p.Wk), tape.constant(p.bk),
                         tape.constant(p.Wv), tape.constant(p.bv)};
  AttentionHeadValues heads;
  Value O = multihead_attention(tape, tape.constant(X), values, cfg, &heads);
  AttentionResult result;
  result.O = O.tensor();
  for (const Value& a : heads.A) result.A_per_head.push_back(a.tensor());
  for (const Value& o : heads.O) result.O_per_head.push_back(o.tensor());
  return result;
}

Value multihead_attention(Tape& tape, Value X, const MultiheadValues& p,
                          const AttentionConfig& cfg,
                          AttentionHeadValues* heads) {
  cfg.validate();
  if (X.shape() != std::vector<std::size_t>{cfg.l, cfg.d}) {
    throw DimensionError("multihead_attention: X " + X.tensor().shape_str() +
                         " does not match configured (" + std::to_string(cfg.l) +
                         "x" + std::to_string(cfg.d) + ")");
  }
  Value Q = add_row_vector(matmul(X, p.Wq), p.bq);
  Value K = add_row_vector(matmul(X, p.Wk), p.bk);
  Value V = add_row_vector(matmul(X, p.Wv), p.bv);

  Value taps;
  if (cfg.blur_mode != BlurMode::none) {
    taps = tape.constant(
        BlurKernel::gaussian(cfg.k, cfg.sigma, cfg.normalize_kernel).taps);
  }

  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Value> outputs;
  for (std::size_t head = 0; head < cfg.h; ++head) {
    Value Qh = slice_cols(Q, head * dh, dh);
    Value Kh = slice_cols(K, head * dh, dh);
    Value Vh = slice_cols(V, head * dh, dh);
    Value A = softmax_rows(scale(matmul(Qh, transpose(Kh)), inv_sqrt));
    if (cfg.blur_mode == BlurMode::on_values) {
      Vh = conv1d_same(Vh, taps);
    }
    Value Oh = matmul(A, Vh);
    if (cfg.blur_mode == BlurMode::on_outputs) {
      Oh = conv1d_same(Oh, taps);
    }
    if (heads) {
      heads->A.push_back(A);
      heads->O.push_back(Oh);
    }
    outputs.push_back(Oh);
  }
  return concat_cols(outputs);
}

}  // namespace sesame
