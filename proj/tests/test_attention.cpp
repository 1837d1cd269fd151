#include <cmath>
#include <vector>

#include "doctest.h"
#include "sesame/attention.hpp"
#include "sesame/ops.hpp"
#include "sesame/rng.hpp"

using namespace sesame;

namespace {

AttentionConfig toy_config(std::size_t l, std::size_t d, std::size_t h,
                           BlurMode mode, std::size_t k, double sigma) {
  AttentionConfig cfg;
  cfg.l = l;
  cfg.d = d;
  cfg.h = h;
  cfg.blur_mode = mode;
  cfg.k = k;
  cfg.sigma = sigma;
  return cfg;
}

MultiheadParams random_params(Rng& rng, std::size_t d) {
  return MultiheadParams::zero_bias(rng.uniform_tensor({d, d}, -0.3, 0.3),
                                    rng.uniform_tensor({d, d}, -0.3, 0.3),
                                    rng.uniform_tensor({d, d}, -0.3, 0.3));
}

}  // namespace

TEST_CASE("gaussian kernel closed form") {
  BlurKernel k1 = BlurKernel::gaussian(1, 0.42);
  CHECK(k1.taps.shape() == std::vector<std::size_t>{1});
  CHECK(k1.taps[0] == 1.0);

  BlurKernel k3 = BlurKernel::gaussian(3, 1.0);
  const double side = std::exp(-0.5);
  CHECK(k3.taps[0] == doctest::Approx(side).epsilon(1e-15));
  CHECK(k3.taps[1] == 1.0);
  CHECK(k3.taps[2] == doctest::Approx(side).epsilon(1e-15));

  BlurKernel sharp = BlurKernel::gaussian(5, 0.01);
  CHECK(sharp.taps[2] == 1.0);
  CHECK(sharp.taps[0] < 1e-300);
  CHECK(sharp.taps[1] < 1e-300);
  CHECK(sharp.taps[3] < 1e-300);
  CHECK(sharp.taps[4] < 1e-300);
}

TEST_CASE("gaussian kernel symmetry, center, range across a grid") {
  for (std::size_t k : {1u, 3u, 5u, 7u, 9u}) {
    for (double sigma : {0.01, 0.1, 0.3, 0.5, 1.0, 2.0}) {
      BlurKernel kernel = BlurKernel::gaussian(k, sigma);
      CHECK(kernel.taps[k / 2] == 1.0);
      for (std::size_t x = 0; x < k; ++x) {
        CHECK(kernel.taps[x] == kernel.taps[k - 1 - x]);
        CHECK(kernel.taps[x] >= 0.0);
        CHECK(kernel.taps[x] <= 1.0);
      }
    }
  }
}

TEST_CASE("gaussian kernel rejects bad arguments, supports normalization") {
  CHECK_THROWS_AS(BlurKernel::gaussian(2, 1.0), ConfigError);
  CHECK_THROWS_AS(BlurKernel::gaussian(0, 1.0), ConfigError);
  CHECK_THROWS_AS(BlurKernel::gaussian(3, 0.0), ConfigError);
  CHECK_THROWS_AS(BlurKernel::gaussian(3, -1.0), ConfigError);

  BlurKernel normalized = BlurKernel::gaussian(5, 0.7, true);
  double sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) sum += normalized.taps[i];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("scaled dot attention singletons and symmetry") {
  Tensor v1 = Tensor::matrix({{3.0, -1.0}});
  auto [a1, o1] = scaled_dot_attention(Tensor::matrix({{0.4, 0.2}}),
                                       Tensor::matrix({{-0.3, 0.9}}), v1);
  CHECK(a1.at(0, 0) == 1.0);
  CHECK(o1.bit_equal(v1));

  // Orthogonal Q and K: uniform attention, outputs are column means of V.
  Tensor q = Tensor::matrix({{1.0, 0.0}, {2.0, 0.0}, {-1.0, 0.0}});
  Tensor k = Tensor::matrix({{0.0, 1.0}, {0.0, -3.0}, {0.0, 2.0}});
  Tensor v = Tensor::matrix({{3.0, 0.0}, {0.0, 6.0}, {3.0, 3.0}});
  auto [a, o] = scaled_dot_attention(q, ops::transpose(ops::transpose(k)), v);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(a.at(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
    CHECK(o.at(i, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(o.at(i, 1) == doctest::Approx(3.0).epsilon(1e-14));
  }
}

TEST_CASE("scaled dot attention hand example at d' = 1") {
  Tensor q = Tensor::matrix({{1.0}, {0.0}});
  Tensor k = Tensor::matrix({{1.0}, {0.0}});
  Tensor v = Tensor::matrix({{2.0}, {4.0}});
  auto [a, o] = scaled_dot_attention(q, k, v);
  const double e = std::exp(1.0);
  CHECK(a.at(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-15));
  CHECK(a.at(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-15));
  CHECK(o.at(0, 0) == doctest::Approx((2.0 * e + 4.0) / (e + 1.0)).epsilon(1e-15));
  CHECK(o.at(0, 0) == doctest::Approx(2.5379).epsilon(1e-4));
  CHECK(o.at(1, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("attention rows sum to one in every blur mode") {
  Rng rng(41);
  Tensor X = rng.uniform_tensor({6, 8}, -1.0, 1.0);
  MultiheadParams params = random_params(rng, 8);
  for (BlurMode mode :
       {BlurMode::none, BlurMode::on_outputs, BlurMode::on_values}) {
    AttentionResult r = multihead_attention(
        X, params, toy_config(6, 8, 2, mode, 3, 0.4));
    REQUIRE(r.A_per_head.size() == 2);
    for (const Tensor& A : r.A_per_head) {
      for (std::size_t i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 6; ++j) sum += A.at(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("single head without blur reduces to scaled dot attention") {
  Rng rng(42);
  Tensor X = rng.uniform_tensor({5, 4}, -1.0, 1.0);
  MultiheadParams params = random_params(rng, 4);
  AttentionResult r = multihead_attention(
      X, params, toy_config(5, 4, 1, BlurMode::none, 3, 0.4));

  Tensor Q = ops::matmul(X, params.Wq);
  Tensor K = ops::matmul(X, params.Wk);
  Tensor V = ops::matmul(X, params.Wv);
  auto [A, O] = scaled_dot_attention(Q, K, V);
  CHECK(ops::max_abs_diff(r.O, O) == 0.0);
  CHECK(ops::max_abs_diff(r.A_per_head[0], A) == 0.0);
}

TEST_CASE("width-one kernels are exactly the unblurred pass") {
  Rng rng(43);
  Tensor X = rng.uniform_tensor({6, 8}, -1.0, 1.0);
  MultiheadParams params = random_params(rng, 8);
  Tensor plain =
      multihead_attention(X, params, toy_config(6, 8, 2, BlurMode::none, 3, 0.4))
          .O;
  for (BlurMode mode : {BlurMode::on_outputs, BlurMode::on_values}) {
    Tensor blurred =
        multihead_attention(X, params, toy_config(6, 8, 2, mode, 1, 0.4)).O;
    CHECK(blurred.bit_equal(plain));
  }
}

TEST_CASE("two heads match a by-hand composition of the primitives") {
  Rng rng(44);
  const std::size_t l = 4, d = 4, h = 2, dh = 2;
  Tensor X = rng.uniform_tensor({l, d}, -1.0, 1.0);
  MultiheadParams params = random_params(rng, d);
  AttentionResult got = multihead_attention(
      X, params, toy_config(l, d, h, BlurMode::on_outputs, 3, 0.7));

  const BlurKernel kernel = BlurKernel::gaussian(3, 0.7);
  Tensor Q = ops::matmul(X, params.Wq);
  Tensor K = ops::matmul(X, params.Wk);
  Tensor V = ops::matmul(X, params.Wv);
  std::vector<Tensor> blocks;
  for (std::size_t head = 0; head < h; ++head) {
    Tensor Qh = ops::slice_cols(Q, head * dh, dh);
    Tensor Kh = ops::slice_cols(K, head * dh, dh);
    Tensor Vh = ops::slice_cols(V, head * dh, dh);
    auto [Ah, Oh] = scaled_dot_attention(Qh, Kh, Vh);
    blocks.push_back(ops::conv1d_same(Oh, kernel.taps));
    CHECK(got.A_per_head[head].bit_equal(Ah));
  }
  CHECK(got.O.bit_equal(ops::concat_cols(blocks)));
  CHECK(got.O_per_head[0].bit_equal(blocks[0]));
  CHECK(got.O_per_head[1].bit_equal(blocks[1]));
}

TEST_CASE("swapping head blocks permutes output blocks exactly") {
  Rng rng(45);
  const std::size_t l = 5, d = 6, dh = 3;
  Tensor X = rng.uniform_tensor({l, d}, -1.0, 1.0);
  MultiheadParams params = random_params(rng, d);

  auto swap_blocks = [dh](const Tensor& W) {
    Tensor left = ops::slice_cols(W, 0, dh);
    Tensor right = ops::slice_cols(W, dh, dh);
    return ops::concat_cols({right, left});
  };
  MultiheadParams swapped = MultiheadParams::zero_bias(
      swap_blocks(params.Wq), swap_blocks(params.Wk), swap_blocks(params.Wv));

  AttentionConfig cfg = toy_config(l, d, 2, BlurMode::on_outputs, 3, 0.5);
  Tensor O = multihead_attention(X, params, cfg).O;
  Tensor O_swapped = multihead_attention(X, swapped, cfg).O;
  CHECK(ops::slice_cols(O_swapped, 0, dh).bit_equal(
      ops::slice_cols(O, dh, dh)));
  CHECK(ops::slice_cols(O_swapped, dh, dh).bit_equal(
      ops::slice_cols(O, 0, dh)));
}

TEST_CASE("blur on outputs equals the double-sum expansion") {
  Rng rng(46);
  double worst = 0.0;
  for (std::size_t l = 2; l <= 8; ++l) {
    for (std::size_t dh = 1; dh <= 4; ++dh) {
      for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
        if (k > l) continue;
        const BlurKernel kernel = BlurKernel::gaussian(k, 0.6);
        Tensor A = ops::softmax_rows(rng.uniform_tensor({l, l}, -1.0, 1.0));
        Tensor V = rng.uniform_tensor({l, dh}, -1.0, 1.0);
        Tensor got = blur_on_outputs(ops::matmul(A, V), kernel);

        const int half = static_cast<int>(k) / 2;
        for (std::size_t i = 0; i < l; ++i) {
          for (std::size_t j = 0; j < dh; ++j) {
            double want = 0.0;
            for (int x = -half; x <= half; ++x) {
              const int row = static_cast<int>(i) + x;
              if (row < 0 || row >= static_cast<int>(l)) continue;
              double inner = 0.0;
              for (std::size_t m = 0; m < l; ++m) {
                inner += A.at(static_cast<std::size_t>(row), m) * V.at(m, j);
              }
              want += kernel.taps[static_cast<std::size_t>(x + half)] * inner;
            }
            worst = std::max(worst, std::abs(got.at(i, j) - want));
          }
        }
      }
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("blur on outputs spreads a spike to its neighbors") {
  Tensor O({5, 2});
  O.at(2, 0) = 1.0;
  O.at(2, 1) = -2.0;
  Tensor blurred = blur_on_outputs(O, BlurKernel::gaussian(3, 1.0));
  const double side = std::exp(-0.5);
  CHECK(blurred.at(1, 0) == doctest::Approx(side).epsilon(1e-15));
  CHECK(blurred.at(2, 0) == 1.0);
  CHECK(blurred.at(3, 0) == doctest::Approx(side).epsilon(1e-15));
  CHECK(blurred.at(1, 1) == doctest::Approx(-2.0 * side).epsilon(1e-15));
  CHECK(blurred.at(0, 0) == 0.0);
  CHECK(blurred.at(4, 0) == 0.0);
}

TEST_CASE("blur on values") {
  Rng rng(47);
  Tensor V = rng.uniform_tensor({4, 2}, -1.0, 1.0);
  Tensor A = ops::softmax_rows(rng.uniform_tensor({4, 4}, -1.0, 1.0));
  const BlurKernel k1 = BlurKernel::gaussian(1, 0.5);
  const BlurKernel k3 = BlurKernel::gaussian(3, 1.0);

  CHECK(blur_on_values(V, A, k1).bit_equal(ops::matmul(A, V)));

  Tensor identity({4, 4});
  for (std::size_t i = 0; i < 4; ++i) identity.at(i, i) = 1.0;
  CHECK(ops::max_abs_diff(blur_on_values(V, identity, k3),
                          blur_on_outputs(V, k3)) == 0.0);

  Tensor uniform = Tensor::full({4, 4}, 0.25);
  Tensor out = blur_on_values(V, uniform, k3);
  Tensor blurred = ops::conv1d_same(V, k3.taps);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += blurred.at(i, j) / 4.0;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(out.at(i, j) == doctest::Approx(mean).epsilon(1e-14));
    }
  }
}

TEST_CASE("vanishing sigma turns blur off away from the boundary") {
  Rng rng(48);
  Tensor X = rng.uniform_tensor({6, 8}, -1.0, 1.0);
  MultiheadParams params = random_params(rng, 8);
  Tensor plain =
      multihead_attention(X, params, toy_config(6, 8, 2, BlurMode::none, 3, 1.0))
          .O;
  Tensor blurred = multihead_attention(
                       X, params,
                       toy_config(6, 8, 2, BlurMode::on_outputs, 3, 1e-3))
                       .O;
  for (std::size_t i = 1; i < 5; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(std::abs(blurred.at(i, j) - plain.at(i, j)) < 1e-12);
    }
  }
}

TEST_CASE("attention config invariants") {
  CHECK_THROWS_AS(toy_config(6, 8, 3, BlurMode::none, 3, 0.5).validate(),
                  ConfigError);  // d mod h != 0
  CHECK_THROWS_AS(toy_config(6, 8, 2, BlurMode::none, 4, 0.5).validate(),
                  ConfigError);  // even k
  CHECK_THROWS_AS(toy_config(6, 8, 2, BlurMode::none, 7, 0.5).validate(),
                  ConfigError);  // k > l
  CHECK_THROWS_AS(toy_config(6, 8, 2, BlurMode::none, 3, 0.0).validate(),
                  ConfigError);  // sigma <= 0
  CHECK_NOTHROW(toy_config(6, 8, 2, BlurMode::none, 3, 0.5).validate());
}

TEST_CASE("blur mode names round trip") {
  for (BlurMode mode :
       {BlurMode::none, BlurMode::on_outputs, BlurMode::on_values}) {
    CHECK(parse_blur_mode(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(parse_blur_mode("sideways"), ConfigError);
}
