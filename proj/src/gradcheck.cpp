#include "zoo/gradcheck.hpp"

#include <cmath>

namespace zoo::ag {

double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-2});
  return std::fabs(a - b) / denom;
}

namespace {

double eval_at(const ScalarProgram& f, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(tape.leaf(t, false));
  Var loss = f(tape, leaves);
  const Tensor& lv = tape.val(loss);
  if (lv.size() != 1) throw ShapeError("grad_check: program must be scalar-valued");
  return lv[0];
}

}  // namespace

GradCheckReport grad_check(const ScalarProgram& f, const std::vector<Tensor>& point, double h) {
  // Reverse-mode gradients at the point.
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(tape.leaf(t, true));
  Var loss = f(tape, leaves);
  if (tape.val(loss).size() != 1) throw ShapeError("grad_check: program must be scalar-valued");
  tape.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(tape.grad(v));

  GradCheckReport rep;
  std::vector<Tensor> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    for (std::size_t k = 0; k < point[i].size(); ++k) {
      double x0 = probe[i][k];
      probe[i][k] = x0 + h;
      double fp = eval_at(f, probe);
      probe[i][k] = x0 - h;
      double fm = eval_at(f, probe);
      probe[i][k] = x0;
      double fd = (fp - fm) / (2.0 * h);
      double ad = grads[i][k];
      double re = rel_err(ad, fd);
      double ae = std::fabs(ad - fd);
      if (re > rep.max_rel_err) {
        rep.max_rel_err = re;
        rep.worst_input = i;
        rep.worst_coord = k;
      }
      rep.max_abs_err = std::max(rep.max_abs_err, ae);
    }
  }
  return rep;
}

}  // namespace zoo::ag
