#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "romilab/core/error.h"
#include "romilab/dynamics/ensemble.h"
#include "romilab/dynamics/model_error.h"
#include "romilab/dynamics/tabular.h"
#include "romilab/env/maze.h"
#include "romilab/env/planner.h"

using namespace romilab;
using namespace romilab::dyn;
using data::Transition;
using data::TransitionBuffer;

namespace {

Transition tr(State s, int a, double r, State s2) {
  Transition t;
  t.s = s;
  t.a = Action::discrete(a);
  t.r = r;
  t.s_next = s2;
  return t;
}

State S(int i) { return State::cell(i, 0); }

TransitionBuffer grid_buffer() {
  TransitionBuffer b;
  b.state_dim = 2;
  b.action_dim = 1;
  return b;
}

TransitionBuffer random_buffer(Rng& rng, int n_states, int n_actions, int n) {
  auto b = grid_buffer();
  for (int i = 0; i < n; ++i) {
    const int s = static_cast<int>(uniform_index(rng, n_states));
    const int a = static_cast<int>(uniform_index(rng, n_actions));
    const int s2 = static_cast<int>(uniform_index(rng, n_states));
    b.push(tr(S(s), a, static_cast<double>(s + 10 * a), S(s2)));
  }
  return b;
}

std::string tmp(const std::string& n) { return (std::filesystem::temp_directory_path() / n).string(); }

// Point-mass buffer where s' = s + (a, 0) exactly; velocity unused.
TransitionBuffer shift_buffer(Rng& rng, int n) {
  TransitionBuffer b;
  b.state_dim = 4;
  b.action_dim = 2;
  for (int i = 0; i < n; ++i) {
    Transition t;
    const double x = 1 + 3 * uniform01(rng), a = 2 * uniform01(rng) - 1;
    t.s = State::point(x, 2.0, 0, 0);
    t.a = Action::force(a, 0.0);
    t.s_next = State::point(x + a, 2.0, 0, 0);
    t.r = 0.0;
    b.push(t);
  }
  return b;
}

}  // namespace

TEST(Tabular, CountRatios) {
  auto b = grid_buffer();
  b.push(tr(S(0), 1, 0, S(1)));
  b.push(tr(S(0), 1, 0, S(1)));
  b.push(tr(S(2), 1, 0, S(1)));
  auto m = fit_tabular_reverse(b, 0.0);
  auto d = m.distribution(S(1), Action::discrete(1));
  ASSERT_TRUE(d);
  ASSERT_EQ(d->size(), 2u);
  EXPECT_EQ((*d)[0].first, S(0));
  EXPECT_EQ((*d)[0].second, 2.0 / 3.0);
  EXPECT_EQ((*d)[1].first, S(2));
  EXPECT_EQ((*d)[1].second, 1.0 / 3.0);
}

TEST(Tabular, SingletonPredecessor) {
  auto b = grid_buffer();
  b.push(tr(S(3), 2, 0, S(4)));
  auto m = fit_tabular_reverse(b, 0.0);
  auto d = m.distribution(S(4), Action::discrete(2));
  ASSERT_TRUE(d);
  ASSERT_EQ(d->size(), 1u);
  EXPECT_EQ((*d)[0].second, 1.0);
  Rng rng(0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(m.sample(S(4), Action::discrete(2), rng)->state, S(3));
}

TEST(Tabular, SmoothedUnobservedIsUniform) {
  auto b = grid_buffer();
  b.push(tr(S(0), 0, 0, S(1)));
  b.push(tr(S(1), 0, 0, S(2)));
  b.push(tr(S(2), 0, 0, S(3)));
  auto m = fit_tabular_reverse(b, 0.5);
  auto d = m.distribution(S(0), Action::discrete(3));
  ASSERT_TRUE(d);
  ASSERT_EQ(d->size(), 4u);
  for (const auto& [s, p] : *d) EXPECT_EQ(p, 0.25);
  // Observed pairs mix counts with the smoothing mass.
  auto o = m.distribution(S(1), Action::discrete(0));
  for (const auto& [s, p] : *o) EXPECT_DOUBLE_EQ(p, (s == S(0) ? 1.5 : 0.5) / 3.0);
}

TEST(Tabular, UnobservedIsNoData) {
  auto b = grid_buffer();
  b.push(tr(S(0), 0, 0, S(1)));
  auto m = fit_tabular_reverse(b, 0.0);
  Rng rng(0);
  EXPECT_FALSE(m.distribution(S(1), Action::discrete(1)));
  EXPECT_FALSE(m.sample(S(1), Action::discrete(1), rng));
  EXPECT_FALSE(m.mean_state(S(7), Action::discrete(0)));
}

TEST(Tabular, DisplacementFallbackOnlyInsideSupport) {
  auto b = grid_buffer();
  b.push(tr(State::cell(2, 2), 3, 0, State::cell(2, 3)));
  auto m = fit_tabular(b, {Direction::reverse, 0.0, TabularFallback::displacement});
  // (2,2) is in the support; "right" moved by (0,+1), so its reverse
  // predecessor under "right" is (2,1).
  auto d = m.distribution(State::cell(2, 2), Action::discrete(3));
  ASSERT_TRUE(d);
  EXPECT_EQ(d->front().first, State::cell(2, 1));
  EXPECT_FALSE(m.distribution(State::cell(5, 5), Action::discrete(3)));
  EXPECT_FALSE(m.distribution(State::cell(2, 2), Action::discrete(0)));
}

TEST(Tabular, ExactMleOnRandomBuffers) {
  Rng rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    auto b = random_buffer(rng, 5, 3, 1 + static_cast<int>(uniform_index(rng, 50)));
    auto m = fit_tabular_reverse(b, 0.0);
    std::map<std::pair<State, int>, std::map<State, int>> brute;
    for (const auto& t : b.transitions) ++brute[{t.s_next, t.a.index}][t.s];
    for (const auto& [key, row] : brute) {
      int total = 0;
      for (auto [_, c] : row) total += c;
      auto d = m.distribution(key.first, Action::discrete(key.second));
      ASSERT_TRUE(d);
      ASSERT_EQ(d->size(), row.size());
      double sum = 0;
      for (const auto& [s, p] : *d) {
        EXPECT_EQ(p, static_cast<double>(row.at(s)) / total);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 3; ++a)
        if (!brute.count({S(s), a})) EXPECT_FALSE(m.distribution(S(s), Action::discrete(a)));
  }
}

TEST(Tabular, ProbabilitiesSumToOneWithSmoothing) {
  Rng rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    auto b = random_buffer(rng, 5, 3, 40);
    auto m = fit_tabular_reverse(b, 0.3);
    for (int s = 0; s < 6; ++s)
      for (int a = 0; a < 4; ++a) {
        auto d = m.distribution(S(s), Action::discrete(a));
        ASSERT_TRUE(d);
        double sum = 0;
        for (auto& [_, p] : *d) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
  }
}

TEST(Tabular, ForwardEqualsReverseOfTimeReversed) {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    auto b = random_buffer(rng, 5, 3, 45);
    auto fwd = fit_tabular(b, {Direction::forward, 0.0, TabularFallback::none});
    auto rev = fit_tabular(time_reversed(b), {Direction::reverse, 0.0, TabularFallback::none});
    EXPECT_EQ(fwd.counts(), rev.counts());
    EXPECT_EQ(fwd.support(), rev.support());
  }
}

TEST(Tabular, RewardFactorization) {
  // Deterministic rewards per (s, a): the joint likelihood of (s, r) given
  // (s', a) factors into T_r(s | s', a) times the point-mass reward term.
  Rng rng(3);
  auto b = random_buffer(rng, 4, 2, 50);
  auto m = fit_tabular_reverse(b, 0.0);
  std::map<std::pair<State, int>, std::map<std::pair<State, double>, int>> joint;
  std::map<std::pair<State, int>, int> totals;
  for (const auto& t : b.transitions) {
    ++joint[{t.s_next, t.a.index}][{t.s, t.r}];
    ++totals[{t.s_next, t.a.index}];
  }
  for (const auto& [key, row] : joint) {
    auto d = m.distribution(key.first, Action::discrete(key.second));
    std::map<State, double> p(d->begin(), d->end());
    for (const auto& [sr, c] : row) {
      const double log_joint = std::log(static_cast<double>(c) / totals[key]);
      auto r = m.observed_reward(sr.first, Action::discrete(key.second));
      ASSERT_TRUE(r);
      EXPECT_EQ(*r, sr.second);
      const double log_reward_term = (*r == sr.second) ? 0.0 : -INFINITY;
      EXPECT_NEAR(log_joint, std::log(p.at(sr.first)) + log_reward_term, 1e-12);
    }
  }
}

TEST(Tabular, SampleFrequencies) {
  auto b = grid_buffer();
  b.push(tr(S(0), 1, 0.25, S(1)));
  b.push(tr(S(0), 1, 0.25, S(1)));
  b.push(tr(S(2), 1, 0.75, S(1)));
  auto m = fit_tabular_reverse(b, 0.0);
  Rng rng(99);
  const int n = 100000;
  int k0 = 0;
  for (int i = 0; i < n; ++i) {
    auto p = m.sample(S(1), Action::discrete(1), rng);
    ASSERT_TRUE(p);
    if (p->state == S(0)) {
      ++k0;
      EXPECT_EQ(p->reward, 0.25);
    } else {
      EXPECT_EQ(p->state, S(2));
      EXPECT_EQ(p->reward, 0.75);
    }
  }
  const double p0 = 2.0 / 3.0, sigma = std::sqrt(n * p0 * (1 - p0));
  EXPECT_LE(std::abs(k0 - n * p0), 3 * sigma);
}

TEST(Tabular, ContainerRoundTrip) {
  Rng rng(4);
  auto b = random_buffer(rng, 5, 3, 50);
  auto m = fit_tabular(b, {Direction::forward, 0.1, TabularFallback::displacement});
  auto path = tmp("romilab_tab.bin");
  save_tabular(path, m);
  auto l = load_tabular(path);
  EXPECT_EQ(l.counts(), m.counts());
  EXPECT_EQ(l.support(), m.support());
  EXPECT_EQ(l.direction(), Direction::forward);
  EXPECT_EQ(l.config().epsilon_lap, m.config().epsilon_lap);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 3; ++a)
      EXPECT_EQ(l.observed_reward(S(s), Action::discrete(a)), m.observed_reward(S(s), Action::discrete(a)));
  std::filesystem::remove(path);
}

TEST(Tabular, Preconditions) {
  EXPECT_THROW(fit_tabular_reverse(grid_buffer(), 0.0), PreconditionError);
  auto b = grid_buffer();
  b.push(tr(S(0), 0, 0, S(1)));
  EXPECT_THROW(fit_tabular_reverse(b, -1.0), ConfigError);
}

TEST(ModelError, PerfectTabularOnDeterministicGrid) {
  auto spec = env::builtin_layout("umaze");
  Rng rng(1);
  auto b = env::generate_behavior_dataset(spec, 5000, {}, rng);
  auto split = data::split_holdout(b, 1000, rng);
  auto fwd = fit_tabular(b, {Direction::forward, 0.0, TabularFallback::none});
  auto rev = fit_tabular(b, {Direction::reverse, 0.0, TabularFallback::none});
  auto report = evaluate_model_error(fwd, rev, split.holdout);
  EXPECT_EQ(report.forward.mse, 0.0);
  EXPECT_EQ(report.forward.evaluated, 1000u);
  // Reverse grid dynamics are not unique (a predecessor may be any of the
  // cells one step away), so only non-negativity holds.
  EXPECT_GE(report.reverse.mse, 0.0);
  auto table = model_error_table({report});
  EXPECT_NE(table.find("forward_model"), std::string::npos);
  EXPECT_NE(table.find("reverse_model"), std::string::npos);
}

TEST(Ensemble, SelectElites) {
  EXPECT_EQ(GaussianEnsemble::select_elites({3, 1, 2, 5, 4, 0, 6}, 5), (std::vector<int>{5, 1, 2, 0, 4}));
  EXPECT_EQ(GaussianEnsemble::select_elites({0.7}, 1), (std::vector<int>{0}));
  EXPECT_EQ(GaussianEnsemble::select_elites({1, 1, 0}, 2), (std::vector<int>{2, 0}));
  EXPECT_THROW(GaussianEnsemble::select_elites({1, 2}, 3), ConfigError);
}

TEST(Ensemble, RecoversDeterministicShift) {
  Rng rng(7);
  auto train = shift_buffer(rng, 3000), holdout = shift_buffer(rng, 300);
  EnsembleConfig cfg;
  cfg.n_members = 3;
  cfg.n_elites = 2;
  cfg.hidden = {32, 32};
  cfg.max_epochs = 60;
  cfg.adam.lr = 3e-3;
  auto m = fit_gaussian_ensemble(train, holdout, cfg, rng);
  EXPECT_EQ(m.elites().size(), 2u);
  auto err = evaluate_direction(m, holdout);
  EXPECT_EQ(err.evaluated, 300u);
  // x-error averaged with three exactly constant dimensions.
  EXPECT_LT(err.per_dim[0], 1e-3);
  EXPECT_LT(err.mse, 1e-3);
  // Elites are the lowest holdout NLL members.
  std::vector<double> nll;
  for (const auto& r : m.reports()) nll.push_back(r.best_holdout_nll);
  EXPECT_EQ(m.elites(), GaussianEnsemble::select_elites(nll, 2));
  // A sample lands near the mean prediction.
  Rng srng(1);
  auto q = State::point(2.5, 2.0, 0, 0);
  auto a = Action::force(-0.5, 0.0);
  auto mean = m.mean_state(q, a);
  auto smp = m.sample(q, a, srng);
  ASSERT_TRUE(mean && smp);
  EXPECT_NEAR(mean->x(), 3.0, 0.05);
  EXPECT_NEAR(smp->state.x(), mean->x(), 0.25);
}

TEST(Ensemble, SingleMember) {
  Rng rng(2);
  auto train = shift_buffer(rng, 200), holdout = shift_buffer(rng, 50);
  EnsembleConfig cfg;
  cfg.n_members = 1;
  cfg.n_elites = 1;
  cfg.hidden = {8};
  cfg.max_epochs = 2;
  auto m = fit_gaussian_ensemble(train, holdout, cfg, rng);
  EXPECT_EQ(m.elites(), std::vector<int>{0});
}

TEST(Ensemble, ForwardDirectionAndRoundTrip) {
  Rng rng(5);
  auto train = shift_buffer(rng, 400), holdout = shift_buffer(rng, 50);
  EnsembleConfig cfg;
  cfg.direction = Direction::forward;
  cfg.n_members = 2;
  cfg.n_elites = 1;
  cfg.hidden = {16};
  cfg.max_epochs = 3;
  auto m = fit_gaussian_ensemble(train, holdout, cfg, rng);
  EXPECT_EQ(m.direction(), Direction::forward);
  auto path = tmp("romilab_ens.bin");
  m.save(path);
  auto l = GaussianEnsemble::load(path);
  EXPECT_EQ(l.elites(), m.elites());
  EXPECT_EQ(l.direction(), Direction::forward);
  auto q = State::point(2.0, 2.0, 0, 0);
  auto a = Action::force(0.3, 0.0);
  EXPECT_NEAR(l.mean_state(q, a)->x(), m.mean_state(q, a)->x(), 1e-4);
  std::filesystem::remove(path);
}

TEST(Ensemble, Deterministic) {
  EnsembleConfig cfg;
  cfg.n_members = 2;
  cfg.n_elites = 1;
  cfg.hidden = {8};
  cfg.max_epochs = 2;
  Rng d(3);
  auto train = shift_buffer(d, 200), holdout = shift_buffer(d, 40);
  Rng r1(11), r2(11);
  auto a = fit_gaussian_ensemble(train, holdout, cfg, r1);
  auto b = fit_gaussian_ensemble(train, holdout, cfg, r2);
  for (std::size_t k = 0; k < a.members().size(); ++k)
    EXPECT_EQ(a.members()[k].params(), b.members()[k].params());
}

TEST(Ensemble, DivergenceNamesMember) {
  Rng rng(1);
  auto train = shift_buffer(rng, 100), holdout = shift_buffer(rng, 20);
  train.transitions[5].r = std::nan("");
  EnsembleConfig cfg;
  cfg.n_members = 2;
  cfg.n_elites = 1;
  cfg.hidden = {4};
  cfg.max_epochs = 1;
  try {
    fit_gaussian_ensemble(train, holdout, cfg, rng);
    FAIL() << "expected TrainingDivergedError";
  } catch (const TrainingDivergedError& e) {
    EXPECT_NE(std::string(e.what()).find("member"), std::string::npos);
  }
}

TEST(Ensemble, EmptyHoldoutRejected) {
  Rng rng(1);
  auto train = shift_buffer(rng, 10);
  TransitionBuffer empty;
  EXPECT_THROW(fit_gaussian_ensemble(train, empty, {}, rng), PreconditionError);
}
