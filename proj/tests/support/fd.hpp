#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "kgt/rng.hpp"
#include "kgt/tensor.hpp"

namespace kgt::test {

// Central-difference check of reverse-mode gradients. loss_fn must rebuild
// the computation from the leaves' current data on every call. Returns the
// worst relative error over (a sample of) leaf coordinates.
//
// Two measurement limits are handled explicitly:
//  - coordinates whose half-step and full-step quotients disagree sit on a
//    relu-style kink where the two-sided quotient estimates nothing; they
//    are skipped, with the skip fraction capped so a broken backward cannot
//    hide behind the detector;
//  - gradient components below roughly eps*|loss|/h are smaller than the
//    roundoff of the loss difference itself, so the relative-error
//    denominator is floored at 1e-6 * max(1, |loss|).
inline double max_fd_rel_error(const std::function<Tensor()>& loss_fn,
                               std::vector<Tensor> leaves, double h = 1e-5,
                               size_t max_coords_per_leaf = 32,
                               uint64_t seed = 1234) {
  for (Tensor& leaf : leaves) {
    if (leaf.has_grad()) leaf.zero_grad();
  }
  Tensor loss = loss_fn();
  loss.backward();
  const double floor = 1e-6 * std::max(1.0, std::fabs(loss.item()));

  std::vector<std::vector<double>> analytic;
  for (Tensor& leaf : leaves) {
    analytic.push_back(leaf.has_grad()
                           ? leaf.grad()
                           : std::vector<double>(leaf.size(), 0.0));
  }

  Rng rng(seed);
  double worst = 0.0;
  size_t checked = 0, skipped = 0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    std::vector<size_t> coords;
    if (leaf.size() <= max_coords_per_leaf) {
      for (size_t i = 0; i < leaf.size(); ++i) coords.push_back(i);
    } else {
      std::vector<size_t> all(leaf.size());
      for (size_t i = 0; i < all.size(); ++i) all[i] = i;
      coords = rng.sample_without_replacement(all, max_coords_per_leaf);
    }
    for (size_t c : coords) {
      const double x0 = leaf.data()[c];
      auto probe = [&](double delta) {
        leaf.data()[c] = x0 + delta;
        const double v = loss_fn().item();
        leaf.data()[c] = x0;
        return v;
      };
      const double fd_full = (probe(h) - probe(-h)) / (2.0 * h);
      const double fd_half = (probe(h / 2) - probe(-h / 2)) / h;
      ++checked;
      const double agree =
          std::fabs(fd_full - fd_half) /
          std::max({1.0, std::fabs(fd_full), std::fabs(fd_half)});
      if (agree > 1e-3) {
        ++skipped;  // non-differentiable point for this coordinate
        continue;
      }
      const double an = analytic[li][c];
      const double denom =
          std::max({floor, std::fabs(fd_half), std::fabs(an)});
      worst = std::max(worst, std::fabs(fd_half - an) / denom);
    }
  }
  if (checked > 0 && skipped * 10 > checked) {
    return 1.0;  // too many kink hits to trust the check
  }
  return worst;
}

}  // namespace kgt::test
