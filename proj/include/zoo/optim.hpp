#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zoo/tensor.hpp"

namespace zoo::ag {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Slots are bound to parameter order/shape on the
// first step; later steps must pass the same layout.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
            double lr, const std::vector<std::string>* names = nullptr);

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

// lr(step) = lr_min + 0.5 (lr0 - lr_min) (1 + cos(pi step / total)).
// step > total clamps to lr_min.
double cosine_lr(std::uint64_t step, std::uint64_t total, double lr0, double lr_min);

}  // namespace zoo::ag
