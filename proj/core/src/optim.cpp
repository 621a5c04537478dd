#include "kgt/optim.hpp"

#include <cmath>

#include "kgt/errors.hpp"

namespace kgt {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : cfg_(cfg) {
  for (Tensor& p : params) {
    Slot s;
    s.param = p;
    s.m.assign(p.size(), 0.0);
    s.v.assign(p.size(), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    if (!s.param.requires_grad()) {
      if (s.param.has_grad()) s.param.zero_grad();
      continue;
    }
    if (!s.param.has_grad()) {
      throw NumericError("adam: trainable parameter has no gradient");
    }
    auto& g = s.param.grad();
    auto& x = s.param.data();
    for (size_t i = 0; i < x.size(); ++i) {
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      x[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    s.param.zero_grad();
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

double lr_schedule(int64_t step, int64_t warmup, int64_t total, double base) {
  if (warmup <= 0 || warmup >= total) {
    throw ConfigError("lr_schedule: need 0 < warmup < total");
  }
  if (step < 0 || step > total) {
    throw ConfigError("lr_schedule: step out of [0, total]");
  }
  if (step <= warmup) {
    return base * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return base * static_cast<double>(total - step) /
         static_cast<double>(total - warmup);
}

}  // namespace kgt
