#include "zoo/optim.hpp"

#include <cmath>

namespace zoo::ag {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                double lr, const std::vector<std::string>* names) {
  if (params.size() != grads.size()) {
    throw Error("adam: " + std::to_string(params.size()) + " params vs " +
                std::to_string(grads.size()) + " grads");
  }
  if (lr <= 0) throw Error("adam: lr must be positive");
  if (slots_.empty()) {
    slots_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots_[i].m = Tensor(params[i]->shape);
      slots_[i].v = Tensor(params[i]->shape);
    }
  } else if (slots_.size() != params.size()) {
    throw Error("adam: parameter count changed between steps");
  }
  auto name_of = [&](std::size_t i) {
    return (names && i < names->size()) ? (*names)[i] : "param[" + std::to_string(i) + "]";
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(params[i]->shape, grads[i]->shape)) {
      throw ShapeError("adam: " + name_of(i) + " shape " + shape_str(params[i]->shape) +
                       " vs grad " + shape_str(grads[i]->shape));
    }
    if (!grads[i]->all_finite()) {
      throw Error("adam: non-finite gradient for " + name_of(i));
    }
  }
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = slots_[i].m;
    Tensor& v = slots_[i].v;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double cosine_lr(std::uint64_t step, std::uint64_t total, double lr0, double lr_min) {
  if (lr0 < lr_min) throw Error("cosine_lr: lr0 < lr_min");
  if (total == 0 || step >= total) return lr_min;
  double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(M_PI * frac));
}

}  // namespace zoo::ag
