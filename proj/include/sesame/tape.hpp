#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sesame/ops.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

class Tape;

// Lightweight handle to a node on a Tape. Copyable, trivially cheap.
class Value {
 public:
  Value() = default;
  const Tensor& tensor() const;
  const std::vector<std::size_t>& shape() const { return tensor().shape(); }
  std::size_t size() const { return tensor().size(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode gradient tape. Operations execute eagerly (forward values are
// computed immediately by the plain ops:: kernels) while recording one node
// per op in topological order. backward() walks the nodes in reverse exactly
// once; replaying the same construction on the same inputs reproduces
// bit-identical values and gradients because every step is a fixed sequence
// of double operations.
//
// Single-threaded: one tape belongs to one training step / evaluation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Watched leaf: gradients are accumulated for it and retrievable by name.
  Value parameter(std::string name, Tensor value);
  // Unwatched leaf; gradients never flow into it.
  Value constant(Tensor value);

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every watched
  // node. root must be a scalar. May be called once per tape.
  void backward(const Value& root);

  // Gradient of the last backward() root w.r.t. v; zeros if v is unused.
  Tensor grad(const Value& v) const;

  const std::vector<std::pair<std::string, Value>>& parameters() const {
    return params_;
  }
  std::size_t node_count() const { return nodes_.size(); }

  // --- low-level access for op builders ---
  using BackwardFn = std::function<void(Tape&, int self)>;
  Value emit(Tensor value, const std::vector<int>& parents, BackwardFn fn);
  const Tensor& value_of(int id) const { return nodes_[id].value; }
  // Gradient accumulation buffer, zero-allocated on first use; nullptr when
  // the node does not participate in differentiation.
  Tensor* grad_buf(int id);
  const Tensor& out_grad(int id) const { return *nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    BackwardFn backward_fn;
  };

  friend class Value;
  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, Value>> params_;
  bool backward_done_ = false;
};

// --- differentiable operations ---

Value matmul(Value a, Value b);
Value transpose(Value a);
Value softmax_rows(Value x);
Value conv1d_same(Value input, Value kernel);
Value relu(Value x);
Value sigmoid(Value x);
Value log(Value x);
Value reciprocal(Value x);
Value rsqrt_shifted(Value x, double shift);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double c);
Value add_row_vector(Value x, Value v);
Value mul_row_vector(Value x, Value v);
Value add_col_scalar(Value x, Value c);
Value mul_col_scalar(Value x, Value c);
Value row_mean(Value x);
Value mean_all(Value x);
Value sum_all(Value x);
Value reshape(Value x, std::vector<std::size_t> shape);
Value take_row(Value x, std::size_t row);
Value slice_cols(Value x, std::size_t first, std::size_t count);
Value concat_cols(const std::vector<Value>& blocks);
Value gather_rows(Value table, std::vector<std::size_t> ids);
Value stack_scalars(const std::vector<Value>& scalars);
Value pick(Value x, std::size_t flat_index);

}  // namespace sesame
