#include "zoo/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace zoo::ag {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  std::size_t ra = a.size(), rb = b.size();
  std::size_t r = std::max(ra, rb);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t da = i < r - ra ? 1 : a[i - (r - ra)];
    std::size_t db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                       shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_numel(shape)) {
    throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::full(Shape s, double v) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

// Row-major strides, with 0 where the (right-aligned) dim is broadcast.
std::vector<std::size_t> bc_strides(const Shape& s, const Shape& out) {
  std::size_t r = out.size(), rs = s.size();
  std::vector<std::size_t> st(r, 0);
  std::size_t acc = 1;
  for (std::size_t i = rs; i-- > 0;) {
    st[i + (r - rs)] = (s[i] == 1) ? 0 : acc;
    acc *= s[i];
  }
  for (std::size_t i = 0; i < r - rs; ++i) st[i] = 0;
  // Zero out strides where out dim broadcasts over s.
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t ds = (i < r - rs) ? 1 : s[i - (r - rs)];
    if (ds == 1 && out[i] != 1) st[i] = 0;
  }
  return st;
}

template <typename F>
void bc_loop(const Shape& out_shape, const std::vector<std::size_t>& sa,
             const std::vector<std::size_t>& sb, F&& body) {
  std::size_t r = out_shape.size();
  if (r == 0) {
    body(0, 0, 0);
    return;
  }
  std::vector<std::size_t> idx(r, 0);
  std::size_t n = shape_numel(out_shape);
  std::size_t oa = 0, ob = 0;
  std::size_t last = r - 1;
  std::size_t inner = out_shape[last];
  std::size_t outer = n / std::max<std::size_t>(inner, 1);
  std::size_t flat = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t base_a = oa, base_b = ob;
    for (std::size_t k = 0; k < inner; ++k) {
      body(flat++, base_a + k * sa[last], base_b + k * sb[last]);
    }
    // odometer over leading dims
    for (std::size_t i = last; i-- > 0;) {
      ++idx[i];
      oa += sa[i];
      ob += sb[i];
      if (idx[i] < out_shape[i]) break;
      oa -= sa[i] * out_shape[i];
      ob -= sb[i] * out_shape[i];
      idx[i] = 0;
    }
  }
}

}  // namespace

Tensor bc_apply(const Tensor& a, const Tensor& b, double (*f)(double, double), const char* op) {
  Shape os = broadcast_shape(a.shape, b.shape, op);
  Tensor out(os);
  auto sa = bc_strides(a.shape, os);
  auto sb = bc_strides(b.shape, os);
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* po = out.data.data();
  bc_loop(os, sa, sb,
          [&](std::size_t o, std::size_t ia, std::size_t ib) { po[o] = f(pa[ia], pb[ib]); });
  return out;
}

void bc_accumulate(Tensor& out, const Tensor& a, const Tensor& b, double (*f)(double, double),
                   const char* op) {
  Shape os = broadcast_shape(a.shape, b.shape, op);
  if (!same_shape(out.shape, os)) {
    throw ShapeError(std::string(op) + ": accumulate target " + shape_str(out.shape) +
                     " vs broadcast " + shape_str(os));
  }
  auto sa = bc_strides(a.shape, os);
  auto sb = bc_strides(b.shape, os);
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* po = out.data.data();
  bc_loop(os, sa, sb,
          [&](std::size_t o, std::size_t ia, std::size_t ib) { po[o] += f(pa[ia], pb[ib]); });
}

Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  if (same_shape(g.shape, target)) return g;
  Tensor out(target);
  std::size_t r = g.shape.size();
  auto st = bc_strides(target, g.shape);  // strides of target within g's index space
  // Walk g, accumulate into out at the broadcast-collapsed offset.
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  const double* pg = g.data.data();
  double* po = out.data.data();
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    po[off] += pg[flat];
    for (std::size_t i = r; i-- > 0;) {
      ++idx[i];
      off += st[i];
      if (idx[i] < g.shape[i]) break;
      off -= st[i] * g.shape[i];
      idx[i] = 0;
    }
  }
  return out;
}

}  // namespace zoo::ag
