#pragma once

#include <functional>
#include <vector>

#include "zoo/tape.hpp"

namespace zoo::ag {

// Builds a scalar loss from leaves created on the given tape (one per entry
// of the evaluation point).
using ScalarProgram = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
};

// Compares reverse-mode gradients of `f` against central finite differences
// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. The relative error uses
// denominator max(|ad|, |fd|, 1e-2): plain relative above 1e-2 magnitude,
// absolute below it (the finite-difference noise floor).
GradCheckReport grad_check(const ScalarProgram& f, const std::vector<Tensor>& point,
                           double h = 1e-6);

double rel_err(double a, double b);

}  // namespace zoo::ag
