#include "romilab/approx/adam.h"

#include <cmath>

#include "romilab/core/error.h"

namespace romilab::approx {

void adam_step(AdamState& s, Vec& params, const Vec& grads) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
  ++s.step;
  const auto& c = s.cfg;
  s.m = c.beta1 * s.m + (1.0 - c.beta1) * grads;
  s.v = c.beta2 * s.v + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  params.array() -= c.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + c.eps);
}

}  // namespace romilab::approx
