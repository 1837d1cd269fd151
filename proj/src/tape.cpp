#include "sesame/tape.hpp"

#include <algorithm>
#include <sstream>

namespace sesame {

const Tensor& Value::tensor() const { return tape_->value_of(id_); }

Value Tape::parameter(std::string name, Tensor value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, true, nullptr});
  Value v(this, static_cast<int>(nodes_.size()) - 1);
  params_.emplace_back(std::move(name), v);
  return v;
}

Value Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, false, nullptr});
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::emit(Tensor value, const std::vector<int>& parents, BackwardFn fn) {
  bool needs_grad = false;
  for (int p : parents) needs_grad = needs_grad || nodes_[p].requires_grad;
  Node node{std::move(value), std::nullopt, needs_grad, nullptr};
  if (needs_grad) node.backward_fn = std::move(fn);
  nodes_.push_back(std::move(node));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor* Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.grad) n.grad.emplace(n.value.shape());
  return &*n.grad;
}

void Tape::backward(const Value& root) {
  if (root.tape() != this) {
    throw Error("backward: root value belongs to a different tape");
  }
  if (backward_done_) {
    throw Error("backward: tape already differentiated");
  }
  const Node& r = nodes_[root.id()];
  if (r.value.size() != 1) {
    throw DimensionError("backward: root must be a scalar, got " +
                         r.value.shape_str());
  }
  backward_done_ = true;
  if (!r.requires_grad) return;  // constant graph, all gradients zero
  (*grad_buf(root.id()))[0] = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad && n.backward_fn) n.backward_fn(*this, id);
  }
}

Tensor Tape::grad(const Value& v) const {
  if (!backward_done_) {
    throw Error("grad: backward() has not been run on this tape");
  }
  const Node& n = nodes_[v.id()];
  if (n.grad) return *n.grad;
  return Tensor::zeros(n.value.shape());
}

namespace {

Tape& tape_of(Value a) { return *a.tape(); }

void check_same_tape(Value a, Value b, const char* op) {
  if (a.tape() != b.tape()) {
    throw Error(std::string(op) + ": operands live on different tapes");
  }
}

void axpy(Tensor& dst, const Tensor& src, double factor = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

}  // namespace

Value matmul(Value a, Value b) {
  check_same_tape(a, b, "matmul");
  Tape& t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.emit(ops::matmul(a.tensor(), b.tensor()), {ia, ib},
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  if (Tensor* ga = t.grad_buf(ia)) {
                    axpy(*ga, ops::matmul(g, ops::transpose(t.value_of(ib))));
                  }
                  if (Tensor* gb = t.grad_buf(ib)) {
                    axpy(*gb, ops::matmul(ops::transpose(t.value_of(ia)), g));
                  }
                });
}

Value transpose(Value a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.emit(ops::transpose(a.tensor()), {ia}, [ia](Tape& t, int self) {
    if (Tensor* ga = t.grad_buf(ia)) {
      axpy(*ga, ops::transpose(t.out_grad(self)));
    }
  });
}

Value softmax_rows(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::softmax_rows(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const Tensor& y = t.value_of(self);
    const Tensor& g = t.out_grad(self);
    const std::size_t rows = y.dim(0), cols = y.dim(1);
    for (std::size_t i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < cols; ++j) {
        gx->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
      }
    }
  });
}

Value conv1d_same(Value input, Value kernel) {
  check_same_tape(input, kernel, "conv1d_same");
  Tape& t = tape_of(input);
  const int ii = input.id(), ik = kernel.id();
  return t.emit(
      ops::conv1d_same(input.tensor(), kernel.tensor()), {ii, ik},
      [ii, ik](Tape& t, int self) {
        const Tensor& g = t.out_grad(self);
        const Tensor& in = t.value_of(ii);
        const Tensor& ker = t.value_of(ik);
        const std::size_t k = ker.dim(0);
        if (Tensor* gin = t.grad_buf(ii)) {
          Tensor flipped({k});
          for (std::size_t i = 0; i < k; ++i) flipped[i] = ker[k - 1 - i];
          axpy(*gin, ops::conv1d_same(g, flipped));
        }
        if (Tensor* gker = t.grad_buf(ik)) {
          const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(k / 2);
          const std::ptrdiff_t l = static_cast<std::ptrdiff_t>(in.dim(0));
          for (std::size_t tap = 0; tap < k; ++tap) {
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(tap) - c;
            double acc = 0.0;
            for (std::ptrdiff_t i = 0; i < l; ++i) {
              const std::ptrdiff_t row = i + off;
              if (row < 0 || row >= l) continue;
              for (std::size_t j = 0; j < in.dim(1); ++j) {
                acc += g.at(static_cast<std::size_t>(i), j) *
                       in.at(static_cast<std::size_t>(row), j);
              }
            }
            (*gker)[tap] += acc;
          }
        }
      });
}

Value relu(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::relu(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const Tensor& in = t.value_of(ix);
    const Tensor& g = t.out_grad(self);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) (*gx)[i] += g[i];
    }
  });
}

Value sigmoid(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::sigmoid(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const Tensor& y = t.value_of(self);
    const Tensor& g = t.out_grad(self);
    for (std::size_t i = 0; i < y.size(); ++i) {
      (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  });
}

Value log(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::log(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const Tensor& in = t.value_of(ix);
    const Tensor& g = t.out_grad(self);
    for (std::size_t i = 0; i < in.size(); ++i) (*gx)[i] += g[i] / in[i];
  });
}

Value reciprocal(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::reciprocal(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const Tensor& y = t.value_of(self);
    const Tensor& g = t.out_grad(self);
    for (std::size_t i = 0; i < y.size(); ++i) (*gx)[i] -= g[i] * y[i] * y[i];
  });
}

Value rsqrt_shifted(Value x, double shift) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::rsqrt_shifted(x.tensor(), shift), {ix},
                [ix](Tape& t, int self) {
                  Tensor* gx = t.grad_buf(ix);
                  if (!gx) return;
                  const Tensor& y = t.value_of(self);
                  const Tensor& g = t.out_grad(self);
                  for (std::size_t i = 0; i < y.size(); ++i) {
                    (*gx)[i] += g[i] * (-0.5) * y[i] * y[i] * y[i];
                  }
                });
}

namespace {

// Shared backward for add/sub/mul across the equal-shape and scalar cases.
// side: +1 for the a operand, sign used by sub.
void accumulate_binary(Tape& t, int self, int target, const Tensor& g,
                       const Tensor& factor, bool use_factor, double sign) {
  Tensor* gt = t.grad_buf(target);
  if (!gt) return;
  const std::size_t target_size = gt->size();
  if (target_size == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = use_factor ? g[i] * (factor.size() == 1 ? factor[0] : factor[i])
                            : g[i];
      (*gt)[i] += sign * v;
    }
  } else {
    // target is the scalar operand: reduce over the broadcast.
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      acc += use_factor ? g[i] * (factor.size() == 1 ? factor[0] : factor[i])
                        : g[i];
    }
    (*gt)[0] += sign * acc;
  }
  (void)self;
}

}  // namespace

Value add(Value a, Value b) {
  check_same_tape(a, b, "add");
  Tape& t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.emit(ops::add(a.tensor(), b.tensor()), {ia, ib},
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  accumulate_binary(t, self, ia, g, {}, false, 1.0);
                  accumulate_binary(t, self, ib, g, {}, false, 1.0);
                });
}

Value sub(Value a, Value b) {
  check_same_tape(a, b, "sub");
  Tape& t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.emit(ops::sub(a.tensor(), b.tensor()), {ia, ib},
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  accumulate_binary(t, self, ia, g, {}, false, 1.0);
                  accumulate_binary(t, self, ib, g, {}, false, -1.0);
                });
}

Value mul(Value a, Value b) {
  check_same_tape(a, b, "mul");
  Tape& t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.emit(ops::mul(a.tensor(), b.tensor()), {ia, ib},
                [ia, ib](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  accumulate_binary(t, self, ia, g, t.value_of(ib), true, 1.0);
                  accumulate_binary(t, self, ib, g, t.value_of(ia), true, 1.0);
                });
}

Value scale(Value a, double c) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.emit(ops::scale(a.tensor(), c), {ia}, [ia, c](Tape& t, int self) {
    if (Tensor* ga = t.grad_buf(ia)) axpy(*ga, t.out_grad(self), c);
  });
}

Value add_row_vector(Value x, Value v) {
  check_same_tape(x, v, "add_row_vector");
  Tape& t = tape_of(x);
  const int ix = x.id(), iv = v.id();
  return t.emit(ops::add_row_vector(x.tensor(), v.tensor()), {ix, iv},
                [ix, iv](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  if (Tensor* gx = t.grad_buf(ix)) axpy(*gx, g);
                  if (Tensor* gv = t.grad_buf(iv)) {
                    for (std::size_t i = 0; i < g.dim(0); ++i)
                      for (std::size_t j = 0; j < g.dim(1); ++j)
                        (*gv)[j] += g.at(i, j);
                  }
                });
}

Value mul_row_vector(Value x, Value v) {
  check_same_tape(x, v, "mul_row_vector");
  Tape& t = tape_of(x);
  const int ix = x.id(), iv = v.id();
  return t.emit(ops::mul_row_vector(x.tensor(), v.tensor()), {ix, iv},
                [ix, iv](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  const Tensor& xin = t.value_of(ix);
                  const Tensor& vin = t.value_of(iv);
                  if (Tensor* gx = t.grad_buf(ix)) {
                    for (std::size_t i = 0; i < g.dim(0); ++i)
                      for (std::size_t j = 0; j < g.dim(1); ++j)
                        gx->at(i, j) += g.at(i, j) * vin[j];
                  }
                  if (Tensor* gv = t.grad_buf(iv)) {
                    for (std::size_t i = 0; i < g.dim(0); ++i)
                      for (std::size_t j = 0; j < g.dim(1); ++j)
                        (*gv)[j] += g.at(i, j) * xin.at(i, j);
                  }
                });
}

Value add_col_scalar(Value x, Value c) {
  check_same_tape(x, c, "add_col_scalar");
  Tape& t = tape_of(x);
  const int ix = x.id(), ic = c.id();
  return t.emit(ops::add_col_scalar(x.tensor(), c.tensor()), {ix, ic},
                [ix, ic](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  if (Tensor* gx = t.grad_buf(ix)) axpy(*gx, g);
                  if (Tensor* gc = t.grad_buf(ic)) {
                    for (std::size_t i = 0; i < g.dim(0); ++i)
                      for (std::size_t j = 0; j < g.dim(1); ++j)
                        (*gc)[i] += g.at(i, j);
                  }
                });
}

Value mul_col_scalar(Value x, Value c) {
  check_same_tape(x, c, "mul_col_scalar");
  Tape& t = tape_of(x);
  const int ix = x.id(), ic = c.id();
  return t.emit(ops::mul_col_scalar(x.tensor(), c.tensor()), {ix, ic},
                [ix, ic](Tape& t, int self) {
                  const Tensor& g = t.out_grad(self);
                  const Tensor& xin = t.value_of(ix);
                  const Tensor& cin = t.value_of(ic);
                  if (Tensor* gx = t.grad_buf(ix)) {
                    for (std::size_t i = 0; i < g.dim(0); ++i)
                      for (std::size_t j = 0; j < g.dim(1); ++j)
                        gx->at(i, j) += g.at(i, j) * cin[i];
                  }
                  if (Tensor* gc = t.grad_buf(ic)) {
                    for (std::size_t i = 0; i < g.dim(0); ++i)
                      for (std::size_t j = 0; j < g.dim(1); ++j)
                        (*gc)[i] += g.at(i, j) * xin.at(i, j);
                  }
                });
}

Value row_mean(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::row_mean(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const Tensor& g = t.out_grad(self);
    const double inv = 1.0 / static_cast<double>(gx->dim(1));
    for (std::size_t i = 0; i < gx->dim(0); ++i)
      for (std::size_t j = 0; j < gx->dim(1); ++j)
        gx->at(i, j) += g[i] * inv;
  });
}

Value mean_all(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::mean_all(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const double g = t.out_grad(self)[0] / static_cast<double>(gx->size());
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
  });
}

Value sum_all(Value x) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::sum_all(x.tensor()), {ix}, [ix](Tape& t, int self) {
    Tensor* gx = t.grad_buf(ix);
    if (!gx) return;
    const double g = t.out_grad(self)[0];
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
  });
}

Value reshape(Value x, std::vector<std::size_t> shape) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::reshape(x.tensor(), std::move(shape)), {ix},
                [ix](Tape& t, int self) {
                  if (Tensor* gx = t.grad_buf(ix)) axpy(*gx, t.out_grad(self));
                });
}

Value take_row(Value x, std::size_t row) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::take_row(x.tensor(), row), {ix},
                [ix, row](Tape& t, int self) {
                  Tensor* gx = t.grad_buf(ix);
                  if (!gx) return;
                  const Tensor& g = t.out_grad(self);
                  for (std::size_t j = 0; j < g.size(); ++j)
                    gx->at(row, j) += g[j];
                });
}

Value slice_cols(Value x, std::size_t first, std::size_t count) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  return t.emit(ops::slice_cols(x.tensor(), first, count), {ix},
                [ix, first](Tape& t, int self) {
                  Tensor* gx = t.grad_buf(ix);
                  if (!gx) return;
                  const Tensor& g = t.out_grad(self);
                  for (std::size_t i = 0; i < g.dim(0); ++i)
                    for (std::size_t j = 0; j < g.dim(1); ++j)
                      gx->at(i, first + j) += g.at(i, j);
                });
}

Value concat_cols(const std::vector<Value>& blocks) {
  if (blocks.empty()) throw DimensionError("concat_cols: no blocks");
  Tape& t = tape_of(blocks.front());
  std::vector<int> ids;
  std::vector<Tensor> tensors;
  for (Value b : blocks) {
    check_same_tape(blocks.front(), b, "concat_cols");
    ids.push_back(b.id());
    tensors.push_back(b.tensor());
  }
  return t.emit(ops::concat_cols(tensors), ids, [ids](Tape& t, int self) {
    const Tensor& g = t.out_grad(self);
    std::size_t offset = 0;
    for (int id : ids) {
      const std::size_t w = t.value_of(id).dim(1);
      if (Tensor* gb = t.grad_buf(id)) {
        for (std::size_t i = 0; i < g.dim(0); ++i)
          for (std::size_t j = 0; j < w; ++j)
            gb->at(i, j) += g.at(i, offset + j);
      }
      offset += w;
    }
  });
}

Value gather_rows(Value table, std::vector<std::size_t> ids) {
  Tape& t = tape_of(table);
  const int it = table.id();
  Tensor out = ops::gather_rows(table.tensor(), ids);
  return t.emit(std::move(out), {it},
                [it, ids = std::move(ids)](Tape& t, int self) {
                  Tensor* gt = t.grad_buf(it);
                  if (!gt) return;
                  const Tensor& g = t.out_grad(self);
                  for (std::size_t i = 0; i < ids.size(); ++i)
                    for (std::size_t j = 0; j < g.dim(1); ++j)
                      gt->at(ids[i], j) += g.at(i, j);
                });
}

Value stack_scalars(const std::vector<Value>& scalars) {
  if (scalars.empty()) throw DimensionError("stack_scalars: no inputs");
  Tape& t = tape_of(scalars.front());
  std::vector<int> ids;
  Tensor out({scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    check_same_tape(scalars.front(), scalars[i], "stack_scalars");
    if (scalars[i].size() != 1) {
      throw DimensionError("stack_scalars: input " + std::to_string(i) +
                           " is not a scalar: " +
                           scalars[i].tensor().shape_str());
    }
    ids.push_back(scalars[i].id());
    out[i] = scalars[i].tensor()[0];
  }
  return t.emit(std::move(out), ids, [ids](Tape& t, int self) {
    const Tensor& g = t.out_grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (Tensor* gs = t.grad_buf(ids[i])) (*gs)[0] += g[i];
    }
  });
}

Value pick(Value x, std::size_t flat_index) {
  Tape& t = tape_of(x);
  const int ix = x.id();
  if (flat_index >= x.size()) {
    throw DimensionError("pick: index " + std::to_string(flat_index) +
                         " out of range for " + x.tensor().shape_str());
  }
  return t.emit(Tensor::scalar(x.tensor()[flat_index]), {ix},
                [ix, flat_index](Tape& t, int self) {
                  if (Tensor* gx = t.grad_buf(ix)) {
                    (*gx)[flat_index] += t.out_grad(self)[0];
                  }
                });
}

}  // namespace sesame
