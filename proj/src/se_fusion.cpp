#include "sesame/se_fusion.hpp"

#include <cstdio>
#include <fstream>

#include "sesame/errors.hpp"
#include "sesame/ops.hpp"

namespace sesame {

std::string to_string(PoolStrategy strategy) {
  switch (strategy) {
    case PoolStrategy::first: return "first";
    case PoolStrategy::second: return "second";
    case PoolStrategy::second_to_last: return "second_to_last";
    case PoolStrategy::last: return "last";
    case PoolStrategy::sum_last_four: return "sum_last_four";
    case PoolStrategy::sum_all: return "sum_all";
    case PoolStrategy::weighted_average: return "weighted_average";
  }
  throw ConfigError("unknown pooling strategy value");
}

PoolStrategy parse_pool_strategy(const std::string& text) {
  if (text == "first") return PoolStrategy::first;
  if (text == "second") return PoolStrategy::second;
  if (text == "second_to_last") return PoolStrategy::second_to_last;
  if (text == "last") return PoolStrategy::last;
  if (text == "sum_last_four") return PoolStrategy::sum_last_four;
  if (text == "sum_all") return PoolStrategy::sum_all;
  if (text == "weighted_average") return PoolStrategy::weighted_average;
  throw ConfigError("unknown pooling strategy '" + text + "'");
}

SEParams SEParams::zeros(std::size_t n, std::size_t r, bool bias) {
  if (r == 0 || n % r != 0) {
    throw ConfigError("se: layer count n = " + std::to_string(n) +
                      " is not divisible by bottleneck ratio r = " +
                      std::to_string(r));
  }
  SEParams p;
  p.r = r;
  p.has_bias = bias;
  p.W1 = Tensor({n, n / r});
  p.W2 = Tensor({n / r, n});
  if (bias) {
    p.b1 = Tensor({n / r});
    p.b2 = Tensor({n});
  }
  return p;
}

void SEParams::validate() const {
  if (W1.rank() != 2 || W2.rank() != 2) {
    throw DimensionError("se: W1 and W2 must be matrices");
  }
  const std::size_t n = W1.dim(0);
  const std::size_t bottleneck = W1.dim(1);
  if (r == 0 || n % r != 0 || bottleneck != n / r) {
    throw DimensionError("se: W1 " + W1.shape_str() +
                         " does not match n/r bottleneck with r = " +
                         std::to_string(r));
  }
  if (W2.dim(0) != bottleneck || W2.dim(1) != n) {
    throw DimensionError("se: W2 " + W2.shape_str() + " must be (" +
                         std::to_string(bottleneck) + "x" + std::to_string(n) +
                         ")");
  }
  if (has_bias &&
      (b1.shape() != std::vector<std::size_t>{bottleneck} ||
       b2.shape() != std::vector<std::size_t>{n})) {
    throw DimensionError("se: bias shapes do not match the gate widths");
  }
}

namespace {

void require_stack(const Tensor& U) {
  if (U.rank() != 3) {
    throw DimensionError("se: expected a (l x d x n) layer stack, got " +
                         U.shape_str());
  }
}

}  // namespace

Tensor stack_layers(const std::vector<Tensor>& layers) {
  if (layers.empty()) throw DimensionError("stack_layers: no layers");
  const std::size_t l = layers.front().dim(0);
  const std::size_t d = layers.front().dim(1);
  const std::size_t n = layers.size();
  Tensor U({l, d, n});
  for (std::size_t k = 0; k < n; ++k) {
    if (layers[k].shape() != layers.front().shape()) {
      throw DimensionError("stack_layers: layer " + std::to_string(k) +
                           " has shape " + layers[k].shape_str() +
                           ", expected " + layers.front().shape_str());
    }
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < d; ++j) U.at(i, j, k) = layers[k].at(i, j);
  }
  return U;
}

Tensor layer_slice(const Tensor& U, std::size_t k) {
  require_stack(U);
  if (k >= U.dim(2)) {
    throw DimensionError("layer_slice: index " + std::to_string(k) +
                         " out of range for " + U.shape_str());
  }
  Tensor slice({U.dim(0), U.dim(1)});
  for (std::size_t i = 0; i < U.dim(0); ++i)
    for (std::size_t j = 0; j < U.dim(1); ++j) slice.at(i, j) = U.at(i, j, k);
  return slice;
}

Tensor squeeze(const Tensor& U) {
  require_stack(U);
  const double inv = 1.0 / static_cast<double>(U.dim(0) * U.dim(1));
  Tensor z({U.dim(2)});
  for (std::size_t k = 0; k < U.dim(2); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < U.dim(0); ++i)
      for (std::size_t j = 0; j < U.dim(1); ++j) acc += U.at(i, j, k);
    z[k] = acc * inv;
  }
  return z;
}

Tensor excite(const Tensor& z, const SEParams& params) {
  params.validate();
  const std::size_t n = params.W1.dim(0);
  if (z.shape() != std::vector<std::size_t>{n}) {
    throw DimensionError("excite: z " + z.shape_str() + " must be (" +
                         std::to_string(n) + ")");
  }
  Tensor row = ops::reshape(z, {1, n});
  Tensor hidden = ops::matmul(row, params.W1);
  if (params.has_bias) hidden = ops::add_row_vector(hidden, params.b1);
  Tensor gated = ops::matmul(ops::relu(hidden), params.W2);
  if (params.has_bias) gated = ops::add_row_vector(gated, params.b2);
  return ops::reshape(ops::sigmoid(gated), {n});
}

Tensor rescale(const Tensor& U, const Tensor& s) {
  require_stack(U);
  if (s.shape() != std::vector<std::size_t>{U.dim(2)}) {
    throw DimensionError("rescale: s " + s.shape_str() + " must have one " +
                         "weight per layer of " + U.shape_str());
  }
  Tensor out(U.shape());
  for (std::size_t i = 0; i < U.dim(0); ++i)
    for (std::size_t j = 0; j < U.dim(1); ++j)
      for (std::size_t k = 0; k < U.dim(2); ++k)
        out.at(i, j, k) = s[k] * U.at(i, j, k);
  return out;
}

Tensor weighted_average(const Tensor& U, const Tensor& s) {
  require_stack(U);
  if (s.shape() != std::vector<std::size_t>{U.dim(2)}) {
    throw DimensionError("weighted_average: s " + s.shape_str() +
                         " must have one weight per layer of " +
                         U.shape_str());
  }
  double denom = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) denom += s[k];
  if (!(denom > 0.0)) {
    throw InputError("weighted_average: weights sum to a non-positive value");
  }
  Tensor out({U.dim(0), U.dim(1)});
  for (std::size_t i = 0; i < U.dim(0); ++i) {
    for (std::size_t j = 0; j < U.dim(1); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < U.dim(2); ++k) acc += s[k] * U.at(i, j, k);
      out.at(i, j) = acc / denom;
    }
  }
  return out;
}

namespace {

Tensor sum_slices(const Tensor& U, std::size_t first, std::size_t count) {
  Tensor out({U.dim(0), U.dim(1)});
  for (std::size_t i = 0; i < U.dim(0); ++i)
    for (std::size_t j = 0; j < U.dim(1); ++j) {
      double acc = 0.0;
      for (std::size_t k = first; k < first + count; ++k)
        acc += U.at(i, j, k);
      out.at(i, j) = acc;
    }
  return out;
}

void require_layers(const Tensor& U, std::size_t needed,
                    PoolStrategy strategy) {
  if (U.dim(2) < needed) {
    throw ConfigError("pool: strategy '" + to_string(strategy) + "' needs " +
                      std::to_string(needed) + " layers, stack has " +
                      std::to_string(U.dim(2)));
  }
}

}  // namespace

Tensor pool(const Tensor& U, PoolStrategy strategy, const Tensor* s) {
  require_stack(U);
  const std::size_t n = U.dim(2);
  switch (strategy) {
    case PoolStrategy::first:
      return layer_slice(U, 0);
    case PoolStrategy::second:
      require_layers(U, 2, strategy);
      return layer_slice(U, 1);
    case PoolStrategy::second_to_last:
      require_layers(U, 2, strategy);
      return layer_slice(U, n - 2);
    case PoolStrategy::last:
      return layer_slice(U, n - 1);
    case PoolStrategy::sum_last_four:
      require_layers(U, 4, strategy);
      return sum_slices(U, n - 4, 4);
    case PoolStrategy::sum_all:
      return sum_slices(U, 0, n);
    case PoolStrategy::weighted_average:
      if (!s) {
        throw ConfigError(
            "pool: strategy 'weighted_average' needs excitation weights");
      }
      return weighted_average(U, *s);
  }
  throw ConfigError("unknown pooling strategy value");
}

std::vector<std::pair<std::size_t, double>> layer_weight_report(
    const Tensor& s) {
  std::vector<std::pair<std::size_t, double>> rows;
  for (std::size_t k = 0; k < s.size(); ++k) rows.emplace_back(k + 1, s[k]);
  return rows;
}

std::string layer_weight_csv(const Tensor& s) {
  std::string text = "layer,weight\n";
  char buf[64];
  for (const auto& [layer, weight] : layer_weight_report(s)) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", layer, weight);
    text += buf;
  }
  return text;
}

void write_layer_weight_csv(const std::filesystem::path& path,
                            const Tensor& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << layer_weight_csv(s);
}

Value se_excitation(const std::vector<Value>& layers, const SEValues& params) {
  if (layers.empty()) throw DimensionError("se_excitation: no layers");
  std::vector<Value> means;
  for (Value layer : layers) means.push_back(mean_all(layer));
  Value z = reshape(stack_scalars(means), {1, layers.size()});
  Value hidden = matmul(z, params.W1);
  if (params.b1) hidden = add_row_vector(hidden, *params.b1);
  Value gated = matmul(relu(hidden), params.W2);
  if (params.b2) gated = add_row_vector(gated, *params.b2);
  return sigmoid(gated);
}

Value pool_slices(const std::vector<Value>& layers, PoolStrategy strategy,
                  const Value* s) {
  if (layers.empty()) throw DimensionError("pool_slices: no layers");
  const std::size_t n = layers.size();
  auto need = [&](std::size_t count) {
    if (n < count) {
      throw ConfigError("pool: strategy '" + to_string(strategy) + "' needs " +
                        std::to_string(count) + " layers, stack has " +
                        std::to_string(n));
    }
  };
  auto slice = [&](std::size_t k) {
    return s ? mul(layers[k], pick(*s, k)) : layers[k];
  };
  auto sum_range = [&](std::size_t first, std::size_t count) {
    Value acc = slice(first);
    for (std::size_t k = first + 1; k < first + count; ++k) {
      acc = add(acc, slice(k));
    }
    return acc;
  };
  switch (strategy) {
    case PoolStrategy::first:
      return slice(0);
    case PoolStrategy::second:
      need(2);
      return slice(1);
    case PoolStrategy::second_to_last:
      need(2);
      return slice(n - 2);
    case PoolStrategy::last:
      return slice(n - 1);
    case PoolStrategy::sum_last_four:
      need(4);
      return sum_range(n - 4, 4);
    case PoolStrategy::sum_all:
      return sum_range(0, n);
    case PoolStrategy::weighted_average: {
      Value total = sum_range(0, n);
      if (!s) return scale(total, 1.0 / static_cast<double>(n));
      return mul(total, reciprocal(sum_all(*s)));
    }
  }
  throw ConfigError("unknown pooling strategy value");
}

}  // namespace sesame
