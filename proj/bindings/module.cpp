#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "sesame/attention.hpp"
#include "sesame/ops.hpp"
#include "sesame/se_fusion.hpp"
#include "sesame/tensor.hpp"

namespace py = pybind11;
using namespace sesame;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style |
                                               py::array::forcecast>& a) {
  std::vector<std::size_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) {
    shape[static_cast<std::size_t>(i)] =
        static_cast<std::size_t>(a.shape(i));
  }
  Tensor t(shape);
  const double* src = a.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = src[i];
  return t;
}

py::array_t<double> to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) {
    shape[i] = static_cast<py::ssize_t>(t.dim(i));
  }
  py::array_t<double> a(shape);
  double* dst = a.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) dst[i] = t[i];
  return a;
}

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

AttentionConfig make_config(std::size_t l, std::size_t d, std::size_t heads,
                            const std::string& blur_mode, std::size_t k,
                            double sigma, bool normalize_kernel) {
  AttentionConfig cfg;
  cfg.l = l;
  cfg.d = d;
  cfg.h = heads;
  cfg.blur_mode = parse_blur_mode(blur_mode);
  cfg.k = k;
  cfg.sigma = sigma;
  cfg.normalize_kernel = normalize_kernel;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_sesame, m) {
  m.doc() = "Gaussian-blur attention and squeeze-excitation layer fusion";

  m.def(
      "gaussian_kernel",
      [](std::size_t k, double sigma, bool normalize) {
        return to_array(BlurKernel::gaussian(k, sigma, normalize).taps);
      },
      py::arg("k"), py::arg("sigma"), py::arg("normalize") = false,
      "Unnormalized Gaussian taps; center tap is exactly 1.");

  m.def(
      "conv1d_same",
      [](const Array& input, const Array& kernel) {
        return to_array(ops::conv1d_same(to_tensor(input), to_tensor(kernel)));
      },
      py::arg("input"), py::arg("kernel"),
      "Per-column 1-D convolution with zero padding, length preserved.");

  m.def(
      "softmax_rows",
      [](const Array& x) { return to_array(ops::softmax_rows(to_tensor(x))); },
      py::arg("x"));

  m.def(
      "scaled_dot_attention",
      [](const Array& q, const Array& k, const Array& v) {
        const auto r =
            scaled_dot_attention(to_tensor(q), to_tensor(k), to_tensor(v));
        return py::make_tuple(to_array(r.first), to_array(r.second));
      },
      py::arg("q"), py::arg("k"), py::arg("v"),
      "Returns (attention weights, outputs).");

  m.def(
      "multihead_attention",
      [](const Array& x, const Array& wq, const Array& bq, const Array& wk,
         const Array& bk, const Array& wv, const Array& bv, std::size_t heads,
         const std::string& blur_mode, std::size_t k, double sigma,
         bool normalize_kernel) {
        const Tensor xt = to_tensor(x);
        if (xt.rank() != 2) throw DimensionError("x must be 2-D");
        MultiheadParams params{to_tensor(wq), to_tensor(bq), to_tensor(wk),
                               to_tensor(bk), to_tensor(wv), to_tensor(bv)};
        const AttentionConfig cfg = make_config(
            xt.dim(0), xt.dim(1), heads, blur_mode, k, sigma, normalize_kernel);
        return to_array(multihead_attention(xt, params, cfg).O);
      },
      py::arg("x"), py::arg("wq"), py::arg("bq"), py::arg("wk"), py::arg("bk"),
      py::arg("wv"), py::arg("bv"), py::arg("heads") = 1,
      py::arg("blur_mode") = "none", py::arg("k") = 3, py::arg("sigma") = 0.1,
      py::arg("normalize_kernel") = false);

  m.def(
      "squeeze",
      [](const Array& u) { return to_array(squeeze(to_tensor(u))); },
      py::arg("u"), "Mean over each (l, d) slice of a stacked (l, d, n) map.");

  m.def(
      "excite",
      [](const Array& z, const Array& w1, const Array& w2) {
        SEParams params;
        params.W1 = to_tensor(w1);
        params.W2 = to_tensor(w2);
        if (params.W1.rank() == 2 && params.W1.dim(1) > 0) {
          params.r = params.W1.dim(0) / params.W1.dim(1);
        }
        return to_array(excite(to_tensor(z), params));
      },
      py::arg("z"), py::arg("w1"), py::arg("w2"),
      "sigmoid(relu(z W1) W2).");

  m.def(
      "rescale",
      [](const Array& u, const Array& s) {
        return to_array(rescale(to_tensor(u), to_tensor(s)));
      },
      py::arg("u"), py::arg("s"));

  m.def(
      "weighted_average",
      [](const Array& u, const Array& s) {
        return to_array(weighted_average(to_tensor(u), to_tensor(s)));
      },
      py::arg("u"), py::arg("s"));
}
