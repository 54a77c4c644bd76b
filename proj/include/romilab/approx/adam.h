#pragma once

#include "romilab/approx/mlp.h"

namespace romilab::approx {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long step = 0;
  Vec m, v;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig c)
      : cfg(c), m(Vec::Zero(static_cast<Eigen::Index>(n))), v(Vec::Zero(static_cast<Eigen::Index>(n))) {}
};

// Bias-corrected Adam update in place. DimensionError on shape mismatch.
void adam_step(AdamState& state, Vec& params, const Vec& grads);

}  // namespace romilab::approx
