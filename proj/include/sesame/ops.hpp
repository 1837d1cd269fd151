#pragma once

#include <cstddef>
#include <vector>

#include "sesame/tensor.hpp"

namespace sesame {
namespace ops {

// Plain eager tensor math. These functions define the forward semantics for
// the whole library; the gradient tape wraps them and only adds backward
// closures. Shape violations throw DimensionError naming both shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row-wise softmax, stabilised by subtracting each row's max before exp.
Tensor softmax_rows(const Tensor& x);

// SAME-padded 1D cross-correlation along the sequence (row) axis, applied to
// each feature column independently. Rows outside [0, l) read as zero. The
// kernel must have odd length k with 1 <= k <= l. Gaussian taps are symmetric
// so convolution and cross-correlation coincide here.
Tensor conv1d_same(const Tensor& input, const Tensor& kernel);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor reciprocal(const Tensor& x);
// Elementwise 1/sqrt(x + shift).
Tensor rsqrt_shifted(const Tensor& x, double shift);

// Binary elementwise ops accept equal shapes or a scalar (shape {1}) paired
// with a tensor; no other broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Row/column broadcasts over a {rows, cols} matrix.
Tensor add_row_vector(const Tensor& x, const Tensor& v);  // v has shape {cols}
Tensor mul_row_vector(const Tensor& x, const Tensor& v);
Tensor add_col_scalar(const Tensor& x, const Tensor& c);  // c has shape {rows}
Tensor mul_col_scalar(const Tensor& x, const Tensor& c);

Tensor row_mean(const Tensor& x);  // {rows, cols} -> {rows}
Tensor mean_all(const Tensor& x);  // -> {1}
Tensor sum_all(const Tensor& x);   // -> {1}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor take_row(const Tensor& x, std::size_t row);  // {rows, cols} -> {cols}
Tensor slice_cols(const Tensor& x, std::size_t first, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& blocks);
// Gather rows of a {rows, cols} table; ids out of range throw InputError
// naming the offending position.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ops
}  // namespace sesame
