#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "zoo/tensor.hpp"

namespace zoo::ag {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
  bool valid() const { return tape != nullptr; }
};

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
// which is already a topological order; backward() walks it in reverse.
// One tape is single-threaded; independent tapes may run in parallel.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  const Tensor& val(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Gradient of the last backward() pass. Zero tensor if no path reached it.
  const Tensor& grad(Var v);

  // Runs reverse accumulation from `loss` (must be a single element).
  // Clears all previous gradients first, so repeated calls are identical.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // --- op-author surface ---
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var emit(Tensor value, std::initializer_list<Var> parents, BackwardFn bw);
  Var emit(Tensor value, const std::vector<Var>& parents, BackwardFn bw);

  // Grad buffer of node `id`, allocated (zeroed) on demand with `shape`.
  // Returns nullptr when the node does not require grad (caller skips work).
  double* grad_data(std::size_t id, const Shape& shape);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  void accum(std::size_t id, const Tensor& g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  Tensor zero_{Shape{1}};
};

// ---- primitive ops -------------------------------------------------------
// Binary ops broadcast with trailing alignment; gradients are reduced back.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var matmul(Var a, Var b);   // (m x k) . (k x n)
Var transpose(Var a);       // 2-d

Var sin(Var a);
Var cos(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var sigmoid(Var a);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var sum(Var a);                      // all elements -> [1]
Var mean(Var a);                     // all elements -> [1]
Var sum_axis(Var a, std::size_t axis);  // keeps the axis with size 1
Var reduce_max(Var a);               // -> [1], grad to first argmax
Var reduce_min(Var a);               // -> [1], grad to first argmin

Var mse(Var pred, Var target);       // mean squared error -> [1]
Var softmax(Var a);                  // along last axis
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);  // mean NLL -> [1]

Var reshape(Var a, Shape s);
Var broadcast_to(Var a, Shape s);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var narrow(Var a, std::size_t axis, std::size_t start, std::size_t len);
Var gather_rows(Var a, std::vector<std::size_t> rows);  // along axis 0
Var cumsum_exclusive(Var a, std::size_t axis);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace zoo::ag
