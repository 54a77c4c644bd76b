#include "romilab/approx/gaussian.h"

#include <cmath>
#include <numbers>

#include "romilab/core/error.h"

namespace romilab::approx {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
}

GaussianHead make_head(const Mat& mu, const Mat& raw_log_sigma, LogSigmaBounds b) {
  if (mu.rows() != raw_log_sigma.rows() || mu.cols() != raw_log_sigma.cols())
    throw DimensionError("mu and log sigma shapes differ");
  GaussianHead h;
  h.mu = mu;
  h.log_sigma = raw_log_sigma.cwiseMax(b.lo).cwiseMin(b.hi);
  h.active = ((raw_log_sigma.array() >= b.lo) && (raw_log_sigma.array() <= b.hi)).cast<double>().matrix();
  return h;
}

GaussianHead make_head(const Mat& raw, LogSigmaBounds b) {
  if (raw.rows() % 2 != 0) throw DimensionError("gaussian head needs an even number of rows");
  const Eigen::Index d = raw.rows() / 2;
  return make_head(raw.topRows(d), raw.bottomRows(d), b);
}

double gaussian_nll(const GaussianHead& h, const Mat& target) {
  if (target.rows() != h.dim() || target.cols() != h.batch())
    throw DimensionError("gaussian_nll target shape mismatch");
  const auto inv_var = (-2.0 * h.log_sigma.array()).exp();
  const auto diff = target.array() - h.mu.array();
  return (0.5 * diff.square() * inv_var + h.log_sigma.array() + kHalfLog2Pi).sum();
}

double gaussian_nll_grad(const GaussianHead& h, const Mat& target, double scale, Mat& d_raw) {
  if (target.rows() != h.dim() || target.cols() != h.batch())
    throw DimensionError("gaussian_nll target shape mismatch");
  const Eigen::Index d = h.dim();
  const Eigen::ArrayXXd inv_var = (-2.0 * h.log_sigma.array()).exp();
  const Eigen::ArrayXXd diff = target.array() - h.mu.array();
  d_raw.resize(2 * d, h.batch());
  d_raw.topRows(d) = (scale * (-diff * inv_var)).matrix();
  d_raw.bottomRows(d) = (scale * (1.0 - diff.square() * inv_var) * h.active.array()).matrix();
  return scale * (0.5 * diff.square() * inv_var + h.log_sigma.array() + kHalfLog2Pi).sum();
}

Mat reparam_with(const GaussianHead& h, const Mat& eps) {
  if (eps.rows() != h.dim() || eps.cols() != h.batch())
    throw DimensionError("reparam noise shape mismatch");
  return h.mu + h.sigma().cwiseProduct(eps);
}

Mat reparam_sample(const GaussianHead& h, Rng& rng, Mat* eps_out) {
  Mat eps(h.dim(), h.batch());
  for (Eigen::Index j = 0; j < eps.cols(); ++j)
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = standard_normal(rng);
  Mat z = reparam_with(h, eps);
  if (eps_out) *eps_out = std::move(eps);
  return z;
}

Mat reparam_backward(const GaussianHead& h, const Mat& eps, const Mat& d_sample) {
  const Eigen::Index d = h.dim();
  Mat d_raw(2 * d, h.batch());
  d_raw.topRows(d) = d_sample;
  d_raw.bottomRows(d) =
      (d_sample.array() * h.sigma().array() * eps.array() * h.active.array()).matrix();
  return d_raw;
}

double kl_standard_normal(const GaussianHead& h, Mat* d_raw, double scale) {
  const Eigen::ArrayXXd var = (2.0 * h.log_sigma.array()).exp();
  const double kl = 0.5 * (h.mu.array().square() + var - 1.0 - 2.0 * h.log_sigma.array()).sum();
  if (d_raw) {
    const Eigen::Index d = h.dim();
    d_raw->resize(2 * d, h.batch());
    d_raw->topRows(d) = scale * h.mu;
    d_raw->bottomRows(d) = (scale * (var - 1.0) * h.active.array()).matrix();
  }
  return scale * kl;
}

}  // namespace romilab::approx
