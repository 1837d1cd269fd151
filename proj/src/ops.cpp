#include "sesame/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sesame {
namespace ops {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " +
                         t.shape_str());
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << a.shape_str() << " and "
      << b.shape_str();
  throw DimensionError(msg.str());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0)) shape_error("matmul", a, b);
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor out({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double aval = a.at(i, t);
      if (aval == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) {
        out.at(i, j) += aval * b.at(t, j);
      }
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double rowmax = x.at(i, 0);
    for (std::size_t j = 1; j < cols; ++j) rowmax = std::max(rowmax, x.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = std::exp(x.at(i, j) - rowmax);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) /= sum;
  }
  return out;
}

Tensor conv1d_same(const Tensor& input, const Tensor& kernel) {
  require_rank2(input, "conv1d_same");
  if (kernel.rank() != 1) {
    throw DimensionError("conv1d_same: kernel must be rank-1, got " +
                         kernel.shape_str());
  }
  const std::size_t l = input.dim(0), d = input.dim(1), k = kernel.dim(0);
  if (k % 2 == 0 || k < 1) {
    std::ostringstream msg;
    msg << "conv1d_same: kernel size must be odd and >= 1, got " << k;
    throw ConfigError(msg.str());
  }
  if (k > l) {
    std::ostringstream msg;
    msg << "conv1d_same: kernel size " << k << " exceeds sequence length " << l;
    throw ConfigError(msg.str());
  }
  const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out({l, d});
  for (std::size_t i = 0; i < l; ++i) {
    for (std::ptrdiff_t x = -c; x <= c; ++x) {
      const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(i) + x;
      if (row < 0 || row >= static_cast<std::ptrdiff_t>(l)) continue;
      const double tap = kernel[static_cast<std::size_t>(x + c)];
      for (std::size_t j = 0; j < d; ++j) {
        out.at(i, j) += tap * input.at(static_cast<std::size_t>(row), j);
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Split on sign so the exp argument is always <= 0.
    const double v = x[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor log(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::log(x[i]);
  return out;
}

Tensor reciprocal(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / x[i];
  return out;
}

Tensor rsqrt_shifted(const Tensor& x, double shift) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = 1.0 / std::sqrt(x[i] + shift);
  return out;
}

namespace {

template <typename F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  if (a.same_shape(b)) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  if (b.size() == 1) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[0]);
    return out;
  }
  if (a.size() == 1) {
    Tensor out(b.shape());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = f(a[0], b[i]);
    return out;
  }
  shape_error(op, a, b);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

Tensor add_row_vector(const Tensor& x, const Tensor& v) {
  require_rank2(x, "add_row_vector");
  if (v.rank() != 1 || v.dim(0) != x.dim(1)) shape_error("add_row_vector", x, v);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j) out.at(i, j) = x.at(i, j) + v[j];
  return out;
}

Tensor mul_row_vector(const Tensor& x, const Tensor& v) {
  require_rank2(x, "mul_row_vector");
  if (v.rank() != 1 || v.dim(0) != x.dim(1)) shape_error("mul_row_vector", x, v);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j) out.at(i, j) = x.at(i, j) * v[j];
  return out;
}

Tensor add_col_scalar(const Tensor& x, const Tensor& c) {
  require_rank2(x, "add_col_scalar");
  if (c.rank() != 1 || c.dim(0) != x.dim(0)) shape_error("add_col_scalar", x, c);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j) out.at(i, j) = x.at(i, j) + c[i];
  return out;
}

Tensor mul_col_scalar(const Tensor& x, const Tensor& c) {
  require_rank2(x, "mul_col_scalar");
  if (c.rank() != 1 || c.dim(0) != x.dim(0)) shape_error("mul_col_scalar", x, c);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j) out.at(i, j) = x.at(i, j) * c[i];
  return out;
}

Tensor row_mean(const Tensor& x) {
  require_rank2(x, "row_mean");
  Tensor out({x.dim(0)});
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < x.dim(1); ++j) sum += x.at(i, j);
    out[i] = sum / static_cast<double>(x.dim(1));
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[i];
  return Tensor::scalar(sum / static_cast<double>(x.size()));
}

Tensor sum_all(const Tensor& x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[i];
  return Tensor::scalar(sum);
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
  return Tensor(std::move(shape), x.values());
}

Tensor take_row(const Tensor& x, std::size_t row) {
  require_rank2(x, "take_row");
  if (row >= x.dim(0)) {
    std::ostringstream msg;
    msg << "take_row: row " << row << " out of range for " << x.shape_str();
    throw DimensionError(msg.str());
  }
  Tensor out({x.dim(1)});
  for (std::size_t j = 0; j < x.dim(1); ++j) out[j] = x.at(row, j);
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t first, std::size_t count) {
  require_rank2(x, "slice_cols");
  if (first + count > x.dim(1)) {
    std::ostringstream msg;
    msg << "slice_cols: columns [" << first << ", " << first + count
        << ") out of range for " << x.shape_str();
    throw DimensionError(msg.str());
  }
  Tensor out({x.dim(0), count});
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = x.at(i, first + j);
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& blocks) {
  if (blocks.empty()) throw DimensionError("concat_cols: no blocks");
  const std::size_t rows = blocks.front().dim(0);
  std::size_t cols = 0;
  for (const Tensor& b : blocks) {
    require_rank2(b, "concat_cols");
    if (b.dim(0) != rows) shape_error("concat_cols", blocks.front(), b);
    cols += b.dim(1);
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Tensor& b : blocks) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < b.dim(1); ++j)
        out.at(i, offset + j) = b.at(i, j);
    offset += b.dim(1);
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
  require_rank2(table, "gather_rows");
  Tensor out({ids.size(), table.dim(1)});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.dim(0)) {
      std::ostringstream msg;
      msg << "gather_rows: id " << ids[i] << " at position " << i
          << " out of range for table " << table.shape_str();
      throw InputError(msg.str());
    }
    for (std::size_t j = 0; j < table.dim(1); ++j)
      out.at(i, j) = table.at(ids[i], j);
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ops
}  // namespace sesame
