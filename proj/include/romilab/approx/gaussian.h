#pragma once

#include "romilab/approx/mlp.h"

namespace romilab::approx {

struct LogSigmaBounds {
  double lo = -5.0;
  double hi = 2.0;
};

// Diagonal Gaussian over d dimensions for a batch of B columns. `active` is
// 1 where the raw log sigma was inside the bounds and 0 where it was
// clamped; clamped coordinates pass no gradient.
struct GaussianHead {
  Mat mu;         // d x B
  Mat log_sigma;  // d x B, clamped
  Mat active;     // d x B

  Eigen::Index dim() const { return mu.rows(); }
  Eigen::Index batch() const { return mu.cols(); }
  Mat sigma() const { return log_sigma.array().exp().matrix(); }
};

// `raw` stacks mu (first d rows) over raw log sigma (last d rows).
GaussianHead make_head(const Mat& raw, LogSigmaBounds bounds = {});
GaussianHead make_head(const Mat& mu, const Mat& raw_log_sigma, LogSigmaBounds bounds = {});

// -log N(target; mu, diag sigma^2) summed over dimensions and batch columns.
double gaussian_nll(const GaussianHead& head, const Mat& target);

// Returns scale * nll and writes d(scale * nll)/d(raw) into `d_raw` (2d x B).
double gaussian_nll_grad(const GaussianHead& head, const Mat& target, double scale, Mat& d_raw);

// mu + sigma * eps with eps ~ N(0, I); eps is returned through `eps_out`.
Mat reparam_sample(const GaussianHead& head, Rng& rng, Mat* eps_out = nullptr);
Mat reparam_with(const GaussianHead& head, const Mat& eps);
// Pulls d(loss)/d(sample) back to d(loss)/d(raw) (2d x B).
Mat reparam_backward(const GaussianHead& head, const Mat& eps, const Mat& d_sample);

// KL(N(mu, sigma^2) || N(0, I)) summed over dims and batch, closed form
// 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2). With `d_raw`, writes
// d(scale * kl)/d(raw) and returns scale * kl.
double kl_standard_normal(const GaussianHead& head, Mat* d_raw = nullptr, double scale = 1.0);

}  // namespace romilab::approx
