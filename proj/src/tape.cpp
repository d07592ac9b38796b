#include "zoo/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <utility>

namespace zoo::ag {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

void check_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape));
  }
}

double fadd(double a, double b) { return a + b; }
double fsub(double a, double b) { return a - b; }
double fmul(double a, double b) { return a * b; }
double fdiv(double a, double b) { return a / b; }

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit axis_split(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  }
  AxisSplit sp{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

}  // namespace

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::emit(Tensor value, std::initializer_list<Var> parents, BackwardFn bw) {
  return emit(std::move(value), std::vector<Var>(parents), std::move(bw));
}

Var Tape::emit(Tensor value, const std::vector<Var>& parents, BackwardFn bw) {
  bool rg = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw Error("tape: mixing values from different tapes");
    rg = rg || nodes_[p.id].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

double* Tape::grad_data(std::size_t id, const Shape& shape) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(shape);
  return n.grad.data.data();
}

void Tape::accum(std::size_t id, const Tensor& g) {
  double* p = grad_data(id, g.shape);
  if (!p) return;
  const double* q = g.data.data();
  for (std::size_t i = 0; i < g.size(); ++i) p[i] += q[i];
}

const Tensor& Tape::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: loss from another tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(lv.shape));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;  // constant loss: zero gradients
  nodes_[loss.id].grad = Tensor::full(lv.shape, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

// ---- elementwise binary ----------------------------------------------------

namespace {

Var binary_op(Var a, Var b, const char* name, double (*fwd)(double, double),
              void (*bwd)(Tape&, std::size_t, std::size_t, std::size_t)) {
  Tape& t = *a.tape;
  Tensor out = bc_apply(t.val(a), t.val(b), fwd, name);
  std::size_t pa = a.id, pb = b.id;
  return t.emit(std::move(out), {a, b},
                [pa, pb, bwd](Tape& t2, std::size_t self) { bwd(t2, self, pa, pb); });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_op(a, b, "add", fadd, [](Tape& t, std::size_t self, std::size_t pa, std::size_t pb) {
    const Tensor& g = t.grad_of(self);
    if (t.grad_data(pa, t.value_of(pa).shape)) t.accum(pa, reduce_to_shape(g, t.value_of(pa).shape));
    if (t.grad_data(pb, t.value_of(pb).shape)) t.accum(pb, reduce_to_shape(g, t.value_of(pb).shape));
  });
}

Var sub(Var a, Var b) {
  return binary_op(a, b, "sub", fsub, [](Tape& t, std::size_t self, std::size_t pa, std::size_t pb) {
    const Tensor& g = t.grad_of(self);
    if (t.grad_data(pa, t.value_of(pa).shape)) t.accum(pa, reduce_to_shape(g, t.value_of(pa).shape));
    if (t.grad_data(pb, t.value_of(pb).shape)) {
      Tensor r = reduce_to_shape(g, t.value_of(pb).shape);
      for (double& x : r.data) x = -x;
      t.accum(pb, r);
    }
  });
}

Var mul(Var a, Var b) {
  return binary_op(a, b, "mul", fmul, [](Tape& t, std::size_t self, std::size_t pa, std::size_t pb) {
    const Tensor& g = t.grad_of(self);
    if (t.grad_data(pa, t.value_of(pa).shape)) {
      t.accum(pa, reduce_to_shape(bc_apply(g, t.value_of(pb), fmul, "mul.bw"),
                                  t.value_of(pa).shape));
    }
    if (t.grad_data(pb, t.value_of(pb).shape)) {
      t.accum(pb, reduce_to_shape(bc_apply(g, t.value_of(pa), fmul, "mul.bw"),
                                  t.value_of(pb).shape));
    }
  });
}

Var div(Var a, Var b) {
  return binary_op(a, b, "div", fdiv, [](Tape& t, std::size_t self, std::size_t pa, std::size_t pb) {
    const Tensor& g = t.grad_of(self);
    const Tensor& av = t.value_of(pa);
    const Tensor& bv = t.value_of(pb);
    if (t.grad_data(pa, av.shape)) {
      t.accum(pa, reduce_to_shape(bc_apply(g, bv, fdiv, "div.bw"), av.shape));
    }
    if (t.grad_data(pb, bv.shape)) {
      // d/db (a/b) = -a / b^2
      Tensor q = bc_apply(av, bv, [](double x, double y) { return -x / (y * y); }, "div.bw");
      t.accum(pb, reduce_to_shape(bc_apply(g, q, fmul, "div.bw"), bv.shape));
    }
  });
}

// ---- elementwise unary -----------------------------------------------------

namespace {

Var unary_op(Var a, const char* name, double (*fwd)(double),
             double (*dfdx)(double x, double y)) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  Tensor out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  std::size_t pa = a.id;
  (void)name;
  return t.emit(std::move(out), {a}, [pa, dfdx](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    const Tensor& x = t2.value_of(pa);
    const Tensor& y = t2.value_of(self);
    double* gp = t2.grad_data(pa, x.shape);
    if (!gp) return;
    for (std::size_t i = 0; i < x.size(); ++i) gp[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

Var sin(Var a) {
  return unary_op(a, "sin", [](double x) { return std::sin(x); },
                  [](double x, double) { return std::cos(x); });
}
Var cos(Var a) {
  return unary_op(a, "cos", [](double x) { return std::cos(x); },
                  [](double x, double) { return -std::sin(x); });
}
Var tanh(Var a) {
  return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}
Var relu(Var a) {
  return unary_op(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
                  [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}
Var exp(Var a) {
  return unary_op(a, "exp", [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}
Var log(Var a) {
  return unary_op(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}
Var sqrt(Var a) {
  return unary_op(a, "sqrt", [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}
Var sigmoid(Var a) {
  return unary_op(a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}
Var neg(Var a) {
  return unary_op(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  Tensor out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, c](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * c;
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  Tensor out(av.shape);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c;
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa](Tape& t2, std::size_t self) {
    t2.accum(pa, t2.grad_of(self));
  });
}

// ---- matmul / transpose ----------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  check_rank2(av, "matmul");
  check_rank2(bv, "matmul");
  if (av.shape[1] != bv.shape[0]) {
    throw ShapeError("matmul: shape mismatch " + shape_str(av.shape) + " vs " +
                     shape_str(bv.shape));
  }
  std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor out({m, n});
  {
    CMap A(av.data.data(), m, k);
    CMap B(bv.data.data(), k, n);
    MMap C(out.data.data(), m, n);
    C.noalias() = A * B;
  }
  std::size_t pa = a.id, pb = b.id;
  return t.emit(std::move(out), {a, b}, [pa, pb, m, k, n](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    CMap G(g.data.data(), m, n);
    if (double* gp = t2.grad_data(pa, t2.value_of(pa).shape)) {
      CMap B(t2.value_of(pb).data.data(), k, n);
      MMap GA(gp, m, k);
      GA.noalias() += G * B.transpose();
    }
    if (double* gp = t2.grad_data(pb, t2.value_of(pb).shape)) {
      CMap A(t2.value_of(pa).data.data(), m, k);
      MMap GB(gp, k, n);
      GB.noalias() += A.transpose() * G;
    }
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  check_rank2(av, "transpose");
  std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at2(j, i) = av.at2(i, j);
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, m, n](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gp[i * n + j] += g[j * m + i];
  });
}

// ---- reductions ------------------------------------------------------------

Var sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  double s = 0.0;
  for (double v : av.data) s += v;
  std::size_t pa = a.id;
  return t.emit(Tensor::scalar(s), {a}, [pa](Tape& t2, std::size_t self) {
    double g = t2.grad_of(self)[0];
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    std::size_t n = t2.value_of(pa).size();
    for (std::size_t i = 0; i < n; ++i) gp[i] += g;
  });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  double s = 0.0;
  for (double v : av.data) s += v;
  double inv = 1.0 / static_cast<double>(av.size());
  std::size_t pa = a.id;
  return t.emit(Tensor::scalar(s * inv), {a}, [pa, inv](Tape& t2, std::size_t self) {
    double g = t2.grad_of(self)[0] * inv;
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    std::size_t n = t2.value_of(pa).size();
    for (std::size_t i = 0; i < n; ++i) gp[i] += g;
  });
}

Var sum_axis(Var a, std::size_t axis) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  AxisSplit sp = axis_split(av.shape, axis, "sum_axis");
  Shape os = av.shape;
  os[axis] = 1;
  Tensor out(os);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t k = 0; k < sp.len; ++k) {
      const double* src = av.data.data() + (o * sp.len + k) * sp.inner;
      double* dst = out.data.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, sp](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = g.data.data() + o * sp.inner;
      for (std::size_t k = 0; k < sp.len; ++k) {
        double* dst = gp + (o * sp.len + k) * sp.inner;
        for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

namespace {

Var extremum(Var a, bool want_max) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  std::size_t arg = 0;
  double best = av[0];
  for (std::size_t i = 1; i < av.size(); ++i) {
    bool better = want_max ? av[i] > best : av[i] < best;
    if (better) {
      best = av[i];
      arg = i;
    }
  }
  std::size_t pa = a.id;
  return t.emit(Tensor::scalar(best), {a}, [pa, arg](Tape& t2, std::size_t self) {
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    gp[arg] += t2.grad_of(self)[0];
  });
}

}  // namespace

Var reduce_max(Var a) { return extremum(a, true); }
Var reduce_min(Var a) { return extremum(a, false); }

Var mse(Var pred, Var target) {
  Tape& t = *pred.tape;
  const Tensor& pv = t.val(pred);
  const Tensor& tv = t.val(target);
  if (!same_shape(pv.shape, tv.shape)) {
    throw ShapeError("mse: shape mismatch " + shape_str(pv.shape) + " vs " + shape_str(tv.shape));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    double d = pv[i] - tv[i];
    s += d * d;
  }
  double inv = 1.0 / static_cast<double>(pv.size());
  std::size_t pa = pred.id, pb = target.id;
  return t.emit(Tensor::scalar(s * inv), {pred, target}, [pa, pb, inv](Tape& t2, std::size_t self) {
    double g = t2.grad_of(self)[0] * 2.0 * inv;
    const Tensor& p = t2.value_of(pa);
    const Tensor& q = t2.value_of(pb);
    if (double* gp = t2.grad_data(pa, p.shape)) {
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * (p[i] - q[i]);
    }
    if (double* gp = t2.grad_data(pb, q.shape)) {
      for (std::size_t i = 0; i < q.size(); ++i) gp[i] -= g * (p[i] - q[i]);
    }
  });
}

Var softmax(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  if (av.rank() < 1) throw ShapeError("softmax: rank >= 1 required");
  std::size_t cols = av.shape.back();
  std::size_t rows = av.size() / cols;
  Tensor out(av.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data.data() + r * cols;
    double* y = out.data.data() + r * cols;
    double m = x[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - m);
      z += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, rows, cols](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    const Tensor& y = t2.value_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.data.data() + r * cols;
      const double* yr = y.data.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
      for (std::size_t c = 0; c < cols; ++c) gp[r * cols + c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  Tape& t = *logits.tape;
  const Tensor& lv = t.val(logits);
  check_rank2(lv, "softmax_cross_entropy");
  std::size_t rows = lv.shape[0], cols = lv.shape[1];
  if (labels.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cols) {
      throw Error("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    }
  }
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = lv.data.data() + r * cols;
    double m = x[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - m);
    total += m + std::log(z) - x[labels[r]];
  }
  double inv = 1.0 / static_cast<double>(rows);
  std::size_t pa = logits.id;
  std::vector<int> labs = labels;
  return t.emit(Tensor::scalar(total * inv), {logits},
                [pa, rows, cols, inv, labs](Tape& t2, std::size_t self) {
                  double g = t2.grad_of(self)[0] * inv;
                  const Tensor& lv2 = t2.value_of(pa);
                  double* gp = t2.grad_data(pa, lv2.shape);
                  if (!gp) return;
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* x = lv2.data.data() + r * cols;
                    double m = x[0];
                    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
                    double z = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - m);
                    for (std::size_t c = 0; c < cols; ++c) {
                      double p = std::exp(x[c] - m) / z;
                      double onehot = (static_cast<std::size_t>(labs[r]) == c) ? 1.0 : 0.0;
                      gp[r * cols + c] += g * (p - onehot);
                    }
                  }
                });
}

// ---- structural ops --------------------------------------------------------

Var reshape(Var a, Shape s) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  if (shape_numel(s) != av.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(av.shape) + " as " + shape_str(s));
  }
  Tensor out(std::move(s), av.data);
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
  });
}

Var broadcast_to(Var a, Shape s) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  Shape check = broadcast_shape(av.shape, s, "broadcast");
  if (!same_shape(check, s)) {
    throw ShapeError("broadcast: " + shape_str(av.shape) + " does not broadcast to " +
                     shape_str(s));
  }
  Tensor ones(s);  // zero tensor; use bc_apply with add to expand
  Tensor out = bc_apply(av, ones, fadd, "broadcast");
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    const Shape& target = t2.value_of(pa).shape;
    if (t2.grad_data(pa, target)) t2.accum(pa, reduce_to_shape(g, target));
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  Tape& t = *parts[0].tape;
  const Shape& first = t.val(parts[0]).shape;
  Shape os = first;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = t.val(p).shape;
    if (s.size() != first.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(first) + " vs " + shape_str(s));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw ShapeError("concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s));
      }
    }
    total += s[axis];
  }
  os[axis] = total;
  AxisSplit sp = axis_split(os, axis, "concat");
  Tensor out(os);
  std::size_t offset = 0;
  std::vector<std::size_t> ids, lens;
  for (const Var& p : parts) {
    const Tensor& pv = t.val(p);
    std::size_t len = pv.shape[axis];
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = pv.data.data() + o * len * sp.inner;
      double* dst = out.data.data() + (o * sp.len + offset) * sp.inner;
      std::copy(src, src + len * sp.inner, dst);
    }
    ids.push_back(p.id);
    lens.push_back(len);
    offset += len;
  }
  return t.emit(std::move(out), parts, [ids, lens, sp](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      double* gp = t2.grad_data(ids[k], t2.value_of(ids[k]).shape);
      if (gp) {
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = g.data.data() + (o * sp.len + off) * sp.inner;
          double* dst = gp + o * lens[k] * sp.inner;
          for (std::size_t i = 0; i < lens[k] * sp.inner; ++i) dst[i] += src[i];
        }
      }
      off += lens[k];
    }
  });
}

Var narrow(Var a, std::size_t axis, std::size_t start, std::size_t len) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  AxisSplit sp = axis_split(av.shape, axis, "narrow");
  if (start + len > sp.len) {
    throw ShapeError("narrow: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of range for axis size " + std::to_string(sp.len));
  }
  Shape os = av.shape;
  os[axis] = len;
  Tensor out(os);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* src = av.data.data() + (o * sp.len + start) * sp.inner;
    double* dst = out.data.data() + o * len * sp.inner;
    std::copy(src, src + len * sp.inner, dst);
  }
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, sp, start, len](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = g.data.data() + o * len * sp.inner;
      double* dst = gp + (o * sp.len + start) * sp.inner;
      for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
    }
  });
}

Var gather_rows(Var a, std::vector<std::size_t> rows) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  if (av.rank() < 1) throw ShapeError("gather_rows: rank >= 1 required");
  std::size_t n = av.shape[0];
  std::size_t stride = av.size() / n;
  for (std::size_t r : rows) {
    if (r >= n) throw Error("gather_rows: index " + std::to_string(r) + " out of range");
  }
  Shape os = av.shape;
  os[0] = rows.size();
  Tensor out(os);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double* src = av.data.data() + rows[k] * stride;
    std::copy(src, src + stride, out.data.data() + k * stride);
  }
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, rows, stride](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double* src = g.data.data() + k * stride;
      double* dst = gp + rows[k] * stride;
      for (std::size_t i = 0; i < stride; ++i) dst[i] += src[i];
    }
  });
}

Var cumsum_exclusive(Var a, std::size_t axis) {
  Tape& t = *a.tape;
  const Tensor& av = t.val(a);
  AxisSplit sp = axis_split(av.shape, axis, "cumsum_exclusive");
  Tensor out(av.shape);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) {
        std::size_t at = (o * sp.len + k) * sp.inner + i;
        out.data[at] = acc;
        acc += av.data[at];
      }
    }
  }
  std::size_t pa = a.id;
  return t.emit(std::move(out), {a}, [pa, sp](Tape& t2, std::size_t self) {
    const Tensor& g = t2.grad_of(self);
    double* gp = t2.grad_data(pa, t2.value_of(pa).shape);
    if (!gp) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        double acc = 0.0;
        for (std::size_t k = sp.len; k-- > 0;) {
          std::size_t at = (o * sp.len + k) * sp.inner + i;
          gp[at] += acc;
          acc += g.data[at];
        }
      }
    }
  });
}

}  // namespace zoo::ag
