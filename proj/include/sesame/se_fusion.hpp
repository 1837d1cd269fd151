#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sesame/tape.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

enum class PoolStrategy {
  first,
  second,
  second_to_last,
  last,
  sum_last_four,
  sum_all,
  weighted_average,
};

std::string to_string(PoolStrategy strategy);
PoolStrategy parse_pool_strategy(const std::string& text);

// Excitation gate over n layer descriptors with bottleneck width n/r.
struct SEParams {
  Tensor W1;  // {n, n/r}
  Tensor W2;  // {n/r, n}
  std::size_t r = 2;
  bool has_bias = false;
  Tensor b1;  // {n/r} when has_bias
  Tensor b2;  // {n} when has_bias

  static SEParams zeros(std::size_t n, std::size_t r, bool bias = false);
  void validate() const;
};

// U stacks the n layer outputs as a {l, d, n} tensor: U[i,j,k] is layer k.
Tensor stack_layers(const std::vector<Tensor>& layers);
Tensor layer_slice(const Tensor& U, std::size_t k);  // -> {l, d}

// z[k] = mean over i,j of U[i,j,k].
Tensor squeeze(const Tensor& U);
// s = sigmoid(relu(z W1 [+ b1]) W2 [+ b2]), every component in (0, 1).
Tensor excite(const Tensor& z, const SEParams& params);
// u_tilde[:,:,k] = s[k] * U[:,:,k].
Tensor rescale(const Tensor& U, const Tensor& s);
// (sum_k s[k] U[:,:,k]) / (sum_k s[k]).
Tensor weighted_average(const Tensor& U, const Tensor& s);

// Selects or combines layer slices. weighted_average requires s; the other
// strategies ignore it. Layer indices are 1-based in the strategy names:
// "second" is slice index 1, "second_to_last" slice n-2.
Tensor pool(const Tensor& U, PoolStrategy strategy, const Tensor* s = nullptr);

std::vector<std::pair<std::size_t, double>> layer_weight_report(
    const Tensor& s);
// CSV with header "layer,weight", 1-based layer index, 17 significant digits.
void write_layer_weight_csv(const std::filesystem::path& path,
                            const Tensor& s);
std::string layer_weight_csv(const Tensor& s);

// --- tape-side composition over per-layer Values (each {l, d}) ---

struct SEValues {
  Value W1, W2;
  const Value* b1 = nullptr;
  const Value* b2 = nullptr;
};

// Returns s as a {1, n} Value.
Value se_excitation(const std::vector<Value>& layers, const SEValues& params);
// Pools per-layer Values. When `s` ({1, n}) is given the selection strategies
// act on rescaled slices s[k]*layer[k] and weighted_average divides their sum
// by sum(s); with s == nullptr weighted_average degrades to the plain mean.
Value pool_slices(const std::vector<Value>& layers, PoolStrategy strategy,
                  const Value* s = nullptr);

}  // namespace sesame
