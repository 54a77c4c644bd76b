#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "gradcheck.h"
#include "romilab/approx/adam.h"
#include "romilab/approx/gaussian.h"
#include "romilab/approx/mlp.h"
#include "romilab/core/error.h"

using namespace romilab;
using namespace romilab::approx;
using romilab::testing::gradcheck;
using romilab::testing::random_mat;

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2 * std::numbers::pi);
}

TEST(Mlp, ParamCount) {
  Rng rng(0);
  Mlp net({3, 7, 5, 2}, {Activation::swish, Activation::relu, Activation::linear}, rng);
  EXPECT_EQ(net.param_count(), (3u + 1) * 7 + (7u + 1) * 5 + (5u + 1) * 2);
  EXPECT_EQ(net.param_count(), expected_param_count({3, 7, 5, 2}));
}

TEST(Mlp, ZeroNetGivesZero) {
  auto net = Mlp::zeros({4, 8, 3}, {Activation::swish, Activation::linear});
  Rng rng(1);
  Mat x = random_mat(4, 6, rng, 10.0);
  EXPECT_EQ(net.forward(x).norm(), 0.0);
}

TEST(Mlp, IdentityLayer) {
  auto net = Mlp::zeros({3, 3}, {Activation::linear});
  net.weight(0) = Mat::Identity(3, 3);
  Vec x(3);
  x << 1.5, -2.0, 0.25;
  EXPECT_EQ(net.forward_one(x), x);
}

TEST(Mlp, HandEvaluated121) {
  auto net = Mlp::zeros({1, 2, 1}, {Activation::relu, Activation::linear});
  net.weight(0) << 1.0, -2.0;
  net.bias(0) << 0.5, 1.0;
  net.weight(1) << 3.0, 4.0;
  net.bias(1) << -1.0;
  Vec x(1);
  x << 2.0;
  // hidden pre (2.5, -3) -> relu (2.5, 0) -> 3 * 2.5 - 1
  EXPECT_DOUBLE_EQ(net.forward_one(x)(0), 6.5);

  auto sw = Mlp::zeros({1, 2, 1}, {Activation::swish, Activation::linear});
  sw.weight(0) = net.weight(0);
  sw.bias(0) = net.bias(0);
  sw.weight(1) = net.weight(1);
  sw.bias(1) = net.bias(1);
  const auto swish = [](double z) { return z / (1 + std::exp(-z)); };
  EXPECT_NEAR(sw.forward_one(x)(0), 3 * swish(2.5) + 4 * swish(-3.0) - 1, 1e-14);
}

TEST(Mlp, Errors) {
  Rng rng(0);
  Mlp net({2, 3}, {Activation::linear}, rng);
  EXPECT_THROW(net.forward(Mat::Zero(3, 1)), DimensionError);
  Tape empty;
  Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
  EXPECT_THROW(net.backward(empty, Mat::Zero(3, 1), g), StateError);
  EXPECT_THROW(Mlp({2, 3}, {}, rng), ConfigError);
}

TEST(Mlp, Deterministic) {
  Rng a(5), b(5);
  Mlp n1({3, 6, 2}, {Activation::swish, Activation::linear}, a);
  Mlp n2({3, 6, 2}, {Activation::swish, Activation::linear}, b);
  EXPECT_EQ(n1.params(), n2.params());
  Rng rng(6);
  Mat x = random_mat(3, 4, rng);
  Tape t1, t2;
  Mat y1 = n1.forward(x, t1), y2 = n1.forward(x, t2);
  EXPECT_EQ(y1, y2);
  Vec g1 = Vec::Zero(static_cast<Eigen::Index>(n1.param_count())), g2 = g1;
  n1.backward(t1, y1, g1);
  n1.backward(t2, y2, g2);
  EXPECT_EQ(g1, g2);
}

TEST(Backward, ConstantLossHasZeroGradient) {
  Rng rng(2);
  Mlp net({3, 5, 2}, {Activation::swish, Activation::linear}, rng);
  Tape t;
  Mat x = random_mat(3, 4, rng);
  net.forward(x, t);
  Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
  net.backward(t, Mat::Zero(2, 4), g);
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(Backward, LinearSquaredLossClosedForm) {
  Rng rng(3);
  Mlp net({3, 2}, {Activation::linear}, rng);
  Mat x = random_mat(3, 1, rng), y = random_mat(2, 1, rng);
  Tape t;
  Mat out = net.forward(x, t);
  Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
  net.backward(t, 2.0 * (out - y), g);
  Mat expected_w = 2.0 * (net.weight(0) * x + net.bias(0) - y) * x.transpose();
  Eigen::Map<const Mat> gw(g.data(), 2, 3);
  EXPECT_LT((gw - expected_w).cwiseAbs().maxCoeff(), 1e-12);
  Vec expected_b = 2.0 * (out - y);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(g[6 + i], expected_b[i], 1e-12);
}

TEST(Backward, FiniteDifferenceEveryActivation) {
  for (auto act : {Activation::linear, Activation::relu, Activation::swish}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      Mlp net({3, 8, 8, 2}, {act, act, Activation::linear}, rng);
      Mat x = random_mat(3, 6, rng), y = random_mat(2, 6, rng);
      auto loss = [&] { return (net.forward(x) - y).squaredNorm(); };
      Tape t;
      Mat out = net.forward(x, t);
      Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
      net.backward(t, 2.0 * (out - y), g);
      auto r = gradcheck(net.params(), g, loss);
      EXPECT_EQ(r.failed, 0u) << to_string(act) << " seed " << seed << " worst " << r.worst;
    }
  }
}

TEST(GaussianNll, Analytic) {
  Mat mu = Mat::Zero(3, 1), ls = Mat::Zero(3, 1);
  auto h = make_head(mu, ls);
  EXPECT_NEAR(gaussian_nll(h, mu), 3 * kHalfLog2Pi, 1e-14);
  EXPECT_NEAR(3 * kHalfLog2Pi, 0.9189 * 3, 1e-3);
  Mat off = mu;
  off(1, 0) -= 1.0;
  EXPECT_NEAR(gaussian_nll(make_head(Mat::Zero(1, 1), Mat::Zero(1, 1)), Mat::Constant(1, 1, -1.0)),
              0.5 + kHalfLog2Pi, 1e-14);
}

TEST(GaussianNll, MatchesDensityProduct) {
  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    Mat mu = random_mat(4, 3, rng), ls = random_mat(4, 3, rng, 0.5), tgt = random_mat(4, 3, rng);
    auto h = make_head(mu, ls);
    double prod_log = 0;
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 4; ++i) {
        const double s = std::exp(ls(i, j));
        const double dens = std::exp(-0.5 * std::pow((tgt(i, j) - mu(i, j)) / s, 2)) /
                            (s * std::sqrt(2 * std::numbers::pi));
        prod_log += std::log(dens);
      }
    EXPECT_NEAR(gaussian_nll(h, tgt), -prod_log, 1e-10);
  }
}

TEST(GaussianNll, ClampBoundsSigma) {
  Mat ls(2, 1);
  ls << -20.0, 9.0;
  auto h = make_head(Mat::Zero(2, 1), ls, {-5.0, 2.0});
  EXPECT_EQ(h.log_sigma(0, 0), -5.0);
  EXPECT_EQ(h.log_sigma(1, 0), 2.0);
  EXPECT_EQ(h.active.sum(), 0.0);
  Mat d_raw;
  gaussian_nll_grad(h, Mat::Ones(2, 1), 1.0, d_raw);
  EXPECT_EQ(d_raw(2, 0), 0.0);
  EXPECT_EQ(d_raw(3, 0), 0.0);
}

TEST(GaussianNll, GradientThroughMlp) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    Mlp net({4, 10, 10, 6}, {Activation::swish, Activation::swish, Activation::linear}, rng);
    Mat x = random_mat(4, 8, rng), tgt = random_mat(3, 8, rng);
    auto loss = [&] { return gaussian_nll(make_head(net.forward(x)), tgt); };
    Tape t;
    auto head = make_head(net.forward(x, t));
    Mat d_raw;
    gaussian_nll_grad(head, tgt, 1.0, d_raw);
    Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
    net.backward(t, d_raw, g);
    auto r = gradcheck(net.params(), g, loss);
    EXPECT_EQ(r.failed, 0u) << "worst " << r.worst;
  }
}

TEST(Kl, ClosedForm) {
  Mat mu(1, 1);
  mu << 1.7;
  auto h = make_head(mu, Mat::Zero(1, 1));
  EXPECT_NEAR(kl_standard_normal(h), 1.7 * 1.7 / 2, 1e-14);
  EXPECT_EQ(kl_standard_normal(make_head(Mat::Zero(3, 2), Mat::Zero(3, 2))), 0.0);
}

TEST(Kl, GradientMatchesFiniteDifference) {
  Rng rng(4);
  Mat raw = random_mat(6, 5, rng, 0.7);
  Vec p = Eigen::Map<Vec>(raw.data(), raw.size());
  auto loss = [&] { return kl_standard_normal(make_head(Eigen::Map<const Mat>(p.data(), 6, 5))); };
  Mat d;
  kl_standard_normal(make_head(raw), &d);
  Vec g = Eigen::Map<Vec>(d.data(), d.size());
  EXPECT_EQ(gradcheck(p, g, loss).failed, 0u);
}

TEST(Reparam, DegenerateVariance) {
  Mat mu = Mat::Constant(2, 3, 4.2);
  auto h = make_head(mu, Mat::Constant(2, 3, -100.0), {-30.0, 2.0});
  Rng rng(1);
  EXPECT_LT((reparam_sample(h, rng) - mu).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Reparam, MomentsMonteCarlo) {
  auto h = make_head(Mat::Zero(1, 100000), Mat::Zero(1, 100000));
  Rng rng(77);
  Mat z = reparam_sample(h, rng);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().mean();
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_LT(std::abs(var - 1.0), 0.05);
}

TEST(Reparam, Reproducible) {
  auto h = make_head(Mat::Zero(3, 4), Mat::Zero(3, 4));
  Rng a(9), b(9);
  EXPECT_EQ(reparam_sample(h, a), reparam_sample(h, b));
}

TEST(Reparam, BackwardMatchesFiniteDifference) {
  Rng rng(12);
  Mat raw = random_mat(4, 3, rng, 0.5), eps = random_mat(2, 3, rng), w = random_mat(2, 3, rng);
  Vec p = Eigen::Map<Vec>(raw.data(), raw.size());
  auto loss = [&] {
    auto h = make_head(Eigen::Map<const Mat>(p.data(), 4, 3));
    return reparam_with(h, eps).cwiseProduct(w).sum();
  };
  Mat d = reparam_backward(make_head(raw), eps, w);
  Vec g = Eigen::Map<Vec>(d.data(), d.size());
  EXPECT_EQ(gradcheck(p, g, loss).failed, 0u);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Vec p(3);
  p << 1, 2, 3;
  Vec keep = p;
  AdamState st(3, {});
  for (int i = 0; i < 10; ++i) adam_step(st, p, Vec::Zero(3));
  EXPECT_EQ(p, keep);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  Vec p = Vec::Zero(3);
  Vec g(3);
  g << 0.3, -5.0, 1e-3;
  AdamState st(3, {0.01, 0.9, 0.999, 1e-8});
  adam_step(st, p, g);
  // Bias-corrected m/sqrt(v) = sign(g) on the first step.
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
  EXPECT_NEAR(p[2], -0.01, 1e-5);
}

TEST(Adam, ConstantGradientDriftsMonotonically) {
  Vec p = Vec::Zero(2), g(2);
  g << 1.0, -2.0;
  AdamState st(2, {});
  double prev0 = 0, prev1 = 0;
  for (int i = 0; i < 100; ++i) {
    adam_step(st, p, g);
    EXPECT_LT(p[0], prev0);
    EXPECT_GT(p[1], prev1);
    prev0 = p[0];
    prev1 = p[1];
  }
}

TEST(Adam, ShapeMismatch) {
  Vec p = Vec::Zero(2);
  AdamState st(2, {});
  EXPECT_THROW(adam_step(st, p, Vec::Zero(3)), DimensionError);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(3);
  Mlp a({2, 5, 3}, {Activation::relu, Activation::linear}, rng);
  Mlp b({3, 4}, {Activation::swish}, rng);
  auto path = (std::filesystem::temp_directory_path() / "romilab_mlp.bin").string();
  save_mlps(path, {&a, &b}, {{"tag", "x"}});
  nlohmann::json extra;
  auto nets = load_mlps(path, &extra);
  ASSERT_EQ(nets.size(), 2u);
  EXPECT_EQ(extra.at("tag"), "x");
  EXPECT_EQ(nets[0].dims(), a.dims());
  EXPECT_EQ(nets[1].activations(), b.activations());
  for (Eigen::Index i = 0; i < a.params().size(); ++i)
    EXPECT_EQ(nets[0].params()[i], static_cast<double>(static_cast<float>(a.params()[i])));
  std::filesystem::remove(path);
}
