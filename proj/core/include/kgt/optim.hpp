#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgt/tensor.hpp"

namespace kgt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over an explicit parameter list. Parameters whose
// requires_grad flag is off are skipped entirely (no update, moments
// untouched). step() throws when a trainable parameter has no gradient
// buffer, and clears all gradients afterwards.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  void step(double lr);
  void zero_grad();
  int64_t step_count() const { return t_; }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

// Linear ramp 0 -> base over [0, warmup], then linear decay base -> 0 over
// [warmup, total].
double lr_schedule(int64_t step, int64_t warmup, int64_t total, double base);

}  // namespace kgt
