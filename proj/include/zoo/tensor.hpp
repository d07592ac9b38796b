#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zoo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

namespace ag {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

// Broadcast two shapes with trailing alignment (numpy rules, 1-expansion
// only). Throws ShapeError naming `op` on mismatch.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op);

// Dense row-major array of doubles.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}
  Tensor(Shape s, std::vector<double> d);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double v);
  static Tensor scalar(double v) { return full({1}, v); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool empty() const { return data.empty(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double& at2(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at2(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool all_finite() const;
};

// out[i] = f(a[i'], b[i']) over the broadcast of the two shapes.
Tensor bc_apply(const Tensor& a, const Tensor& b, double (*f)(double, double), const char* op);

// Sum `g` down to `target` shape (inverse of broadcasting).
Tensor reduce_to_shape(const Tensor& g, const Shape& target);

// Accumulate f(a[i'],b[i']) * scale into `out` (shape = broadcast result).
void bc_accumulate(Tensor& out, const Tensor& a, const Tensor& b,
                   double (*f)(double, double), const char* op);

}  // namespace ag
}  // namespace zoo
