#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "romilab/core/error.h"
#include "romilab/env/maze.h"
#include "romilab/evalharness/ablation.h"
#include "romilab/evalharness/appendix_a.h"
#include "romilab/evalharness/metrics.h"
#include "romilab/evalharness/pipeline.h"
#include "romilab/evalharness/presets.h"

using namespace romilab;
using namespace romilab::eval;

namespace {

data::TransitionBuffer states_buffer(const std::vector<State>& states) {
  data::TransitionBuffer b;
  b.state_dim = 2;
  b.action_dim = 1;
  for (const auto& s : states) {
    data::Transition t;
    t.s = s;
    t.s_next = s;
    t.a = Action::discrete(0);
    b.push(t);
  }
  return b;
}

RunConfig tiny_config() {
  RunConfig c;
  c.dataset_size = 2000;
  c.holdout_size = 100;
  c.imagination.n_rollouts = 500;
  c.learner.steps = 3000;
  c.eval_episodes = 10;
  c.reference_episodes = 10;
  return c;
}

}  // namespace

TEST(Normalize, ReferenceEndpoints) {
  const RefEntry ref{23.85, 161.86};
  EXPECT_NEAR(normalize_score(161.86, ref), 100.0, 1e-9);
  EXPECT_NEAR(normalize_score(23.85, ref), 0.0, 1e-9);
  EXPECT_NEAR(normalize_score(92.855, ref), 50.0, 1e-9);
  EXPECT_THROW(normalize_score(1.0, RefEntry{5.0, 5.0}), ConfigError);
  EXPECT_THROW(normalize_score(1.0, RefEntry{5.0, 4.0}), ConfigError);
  const auto& d = ScoreReference::d4rl().at("maze2d-umaze|sparse");
  EXPECT_EQ(d.ref_min, 23.85);
  EXPECT_EQ(d.ref_max, 161.86);
}

TEST(Normalize, AffineInRaw) {
  const RefEntry ref{-2.0, 3.0};
  for (double x : {-5.0, 0.0, 0.7, 12.0})
    EXPECT_NEAR(normalize_score(x, ref), 100.0 * (x + 2.0) / 5.0, 1e-9);
}

TEST(Atd, HandValues) {
  auto b = states_buffer({State::cell(0, 0)});
  EXPECT_DOUBLE_EQ(average_trajectory_discrepancy(b, {State::cell(0, 0)}), 0.0);
  EXPECT_DOUBLE_EQ(average_trajectory_discrepancy(b, {State::cell(3, 4)}), 5.0);
  EXPECT_DOUBLE_EQ(average_trajectory_discrepancy(b, {State::cell(0, 0), State::cell(0, 3)}), 1.5);
}

TEST(Atd, NonNegativeAndZeroOnData) {
  Rng rng(11);
  auto spec = env::builtin_layout("umaze");
  auto b = env::generate_behavior_dataset(spec, 500, {}, rng);
  DiscrepancyIndex idx(b, false);
  std::vector<State> on;
  for (std::size_t i = 0; i < 50; ++i) on.push_back(b[i].s);
  EXPECT_EQ(idx.atd(on), 0.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<State> traj;
    for (int j = 0; j < 5; ++j) traj.push_back(env::sample_start(spec, rng));
    EXPECT_GE(idx.atd(traj), 0.0);
  }
}

TEST(Atd, PointUsesPositionOnly) {
  data::TransitionBuffer b;
  b.state_dim = 4;
  b.action_dim = 2;
  data::Transition t;
  t.s = State::point(1, 1, 0, 0);
  t.s_next = t.s;
  t.a = Action::force(0, 0);
  b.push(t);
  EXPECT_DOUBLE_EQ(average_trajectory_discrepancy(b, {State::point(1, 1, 2, 2)}, true), 0.0);
  EXPECT_DOUBLE_EQ(average_trajectory_discrepancy(b, {State::point(4, 5, 0, 0)}, true), 5.0);
}

TEST(Episodes, OneStepGoalAndCollision) {
  auto spec = env::parse_layout(".G\n", "two");
  Rng rng(3);
  const ActFn right = [](const State&, Rng&) { return Action::discrete(3); };
  auto trajs = run_episodes(spec, right, 200, rng);
  int from_start = 0;
  for (const auto& t : trajs) {
    if (t.states.front() == State::cell(0, 0)) {
      ++from_start;
      EXPECT_EQ(t.ret, 1.0);
      EXPECT_TRUE(t.success);
      EXPECT_FALSE(t.collided);
      EXPECT_EQ(t.states.size(), 2u);
    } else {
      // Starting in the goal and stepping off the grid.
      EXPECT_TRUE(t.collided);
      EXPECT_FALSE(t.success);
      EXPECT_EQ(t.ret, 0.0);
    }
  }
  EXPECT_GT(from_start, 50);
  const ActFn up = [](const State&, Rng&) { return Action::discrete(0); };
  for (const auto& t : run_episodes(spec, up, 20, rng)) {
    EXPECT_TRUE(t.collided);
    EXPECT_FALSE(t.success);
  }
}

TEST(Episodes, EpisodeLimitAndDeterminism) {
  auto spec = env::builtin_layout("open5");
  const ActFn random = [](const State&, Rng& r) { return Action::discrete(static_cast<int>(r() % 4)); };
  Rng a(9), b(9);
  auto ta = run_episodes(spec, random, 30, a);
  auto tb = run_episodes(spec, random, 30, b);
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].states, tb[i].states);
    EXPECT_LE(ta[i].actions.size(), static_cast<std::size_t>(spec.episode_limit));
    EXPECT_EQ(ta[i].states.size(), ta[i].actions.size() + 1);
  }
  Rng c(0);
  EXPECT_THROW(run_episodes(spec, random, -1, c), ConfigError);
}

TEST(Stats, PopulationMeanStd) {
  auto m = mean_std({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.std, std::sqrt(1.25));
  auto one = mean_std({7});
  EXPECT_EQ(one.std, 0.0);
  EXPECT_EQ(format_mean_std({1.5, 0.25}, 2), "1.50 ± 0.25");
}

TEST(Stats, AggregateOverSeedMeans) {
  EvalReport a, b;
  a.seeds = {0};
  b.seeds = {1};
  a.n_episodes = b.n_episodes = 10;
  a.normalized_score.mean = 10;
  b.normalized_score.mean = 30;
  a.success_rate = 0.2;
  b.success_rate = 0.6;
  auto g = aggregate("arm", {a, b});
  EXPECT_DOUBLE_EQ(g.normalized_score.mean, 20.0);
  EXPECT_DOUBLE_EQ(g.normalized_score.std, 10.0);
  EXPECT_DOUBLE_EQ(g.success_rate, 0.4);
  EXPECT_EQ(g.seeds, (std::vector<std::uint64_t>{0, 1}));
}

TEST(Csv, HeaderAndRowWidth) {
  const auto h = eval_csv_header();
  EXPECT_EQ(h.rfind("arm,scope,seeds", 0), 0u);
  EvalReport r;
  r.arm = "x";
  r.seeds = {0, 1};
  auto row = eval_csv_row(r, "aggregate");
  auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(commas(row), commas(h));
}

TEST(Reference, ComputedOrderingAndDeterminism) {
  auto spec = env::builtin_layout("umaze");
  auto r1 = compute_reference(spec, 30, 0);
  auto r2 = compute_reference(spec, 30, 0);
  EXPECT_EQ(r1.ref_min, r2.ref_min);
  EXPECT_EQ(r1.ref_max, r2.ref_max);
  EXPECT_GT(r1.ref_max, r1.ref_min);
}

TEST(CorridorFixture, AllCasesPass) {
  auto rep = appendix_a_scenario();
  ASSERT_EQ(rep.cases.size(), 3u);
  EXPECT_TRUE(rep.pass) << rep.to_text();
  // Case 1: the forward model walks into the overestimated s_5; the reverse
  // one does not.
  const auto& c1 = rep.cases[0];
  EXPECT_TRUE(c1.forward.chain_to_s5);
  EXPECT_FALSE(c1.reverse.chain_to_s5);
  EXPECT_TRUE(c1.forward.visits_s5);
  EXPECT_FALSE(c1.reverse.visits_s5);
  EXPECT_TRUE(c1.reverse.success);
}

TEST(RunConfigJson, RoundTripAndUnknownKeys) {
  RunConfig c = tiny_config();
  c.eta = 0.3;
  c.imagination.direction = dyn::Direction::forward;
  auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(RunConfig::from_json(nlohmann::json{{"learner", {{"stepz", 3}}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
  auto o = RunConfig::from_json(nlohmann::json{{"eta", 0.25}}, c);
  EXPECT_EQ(o.eta, 0.25);
  EXPECT_EQ(o.dataset_size, c.dataset_size);
}

TEST(RunConfigJson, ValidateRejectsBadValues) {
  RunConfig c;
  c.eta = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.dataset_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.imagination.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  RunConfig ok;
  EXPECT_NO_THROW(ok.validate());
  EXPECT_GT(ok.resolved().episode_limit, 0);
}

TEST(Presets, Shapes) {
  auto names = preset_names();
  EXPECT_EQ(names.size(), 5u);
  auto p = preset("paper-maze-ablation");
  EXPECT_EQ(p.arms.size(), 3u);
  EXPECT_EQ(p.seeds.size(), 5u);
  EXPECT_EQ(p.asserts.size(), 4u);
  EXPECT_EQ(p.arms[0].imagination.direction, dyn::Direction::reverse);
  EXPECT_EQ(p.arms[1].imagination.direction, dyn::Direction::forward);
  EXPECT_EQ(p.arms[2].eta, 0.0);
  EXPECT_EQ(p.arms[0].dataset_size, 50000u);
  auto rl = preset("rollout-length");
  ASSERT_EQ(rl.arms.size(), 4u);
  EXPECT_EQ(rl.arms[0].imagination.horizon, 1);
  EXPECT_EQ(rl.arms[3].imagination.horizon, 20);
  auto es = preset("eta-sweep");
  ASSERT_EQ(es.arms.size(), 5u);
  EXPECT_DOUBLE_EQ(es.arms[0].eta, 0.1);
  EXPECT_DOUBLE_EQ(es.arms[4].eta, 0.9);
  auto pm = preset("point-model-error");
  EXPECT_EQ(pm.arms[0].space, env::SpaceKind::point);
  EXPECT_EQ(pm.arms[0].model_kind, ModelKind::ensemble);
  EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Ablation, TinyGridRecordsFailuresAndDelta) {
  RunConfig base = tiny_config();
  base.label = "base";
  base.eta = 0.0;
  RunConfig romi = tiny_config();
  RunConfig broken = tiny_config();
  broken.label = "broken";
  broken.learner.lr = 5.0;
  broken.learner.init_value = 1.0;
  broken.learner.gamma = 0.999;
  auto r = run_ablation_grid({romi, base, broken}, {0, 1});
  ASSERT_EQ(r.cells.size(), 6u);
  EXPECT_EQ(r.base_arm, 1);
  EXPECT_TRUE(r.checksums_consistent);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_TRUE(r.cell(0, s).ok) << r.cell(0, s).error;
    EXPECT_TRUE(r.cell(1, s).ok) << r.cell(1, s).error;
    EXPECT_FALSE(r.cell(2, s).ok);
    EXPECT_EQ(r.cell(2, s).error.rfind("train: ", 0), 0u) << r.cell(2, s).error;
    EXPECT_EQ(r.cell(0, s).dataset_checksum, r.cell(1, s).dataset_checksum);
  }
  EXPECT_NE(r.cell(0, 0).dataset_checksum, r.cell(0, 1).dataset_checksum);
  EXPECT_EQ(r.failures(), 2u);
  const auto md = r.markdown();
  EXPECT_NE(md.find("Delta"), std::string::npos);
  const auto csv = r.csv();
  EXPECT_NE(csv.find("delta_normalized_score"), std::string::npos);
  EXPECT_NE(csv.find("train: "), std::string::npos);

  auto again = run_ablation_grid({romi, base, broken}, {0, 1}, AblationOptions{2});
  EXPECT_EQ(again.csv(), csv);

  auto outcomes = evaluate_assertions(
      r, nlohmann::json::array({{{"lhs", "romi.success_rate"}, {"op", ">="}, {"rhs", 0.0}},
                                {{"lhs", "romi.atd"}, {"op", "<"}, {"rhs", "romi.atd"}, {"margin", 0.5}}}));
  ASSERT_EQ(outcomes.size(), 2u);
  EXPECT_TRUE(outcomes[0].pass);
  EXPECT_TRUE(outcomes[1].pass);
  EXPECT_THROW(evaluate_assertions(r, nlohmann::json::array({{{"lhs", "romi.nope"}, {"op", ">"}, {"rhs", 0}}})),
               ConfigError);
  EXPECT_THROW(evaluate_assertions(r, nlohmann::json::array({{{"lhs", "romi.atd"}, {"op", "!"}, {"rhs", 0}}})),
               ConfigError);
}

TEST(Pipeline, DirectoryArtifacts) {
  auto dir = (std::filesystem::temp_directory_path() / "romilab_pipeline_test").string();
  std::filesystem::remove_all(dir);
  RunConfig c = tiny_config();
  c.seeds = {0};
  auto reps = run_pipeline_dir(c, dir);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir + "/eval.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/resolved_config.json"));
  EXPECT_TRUE(std::filesystem::is_directory(dir + "/seed_0"));
  EXPECT_GE(reps[0].success_rate, 0.0);
  EXPECT_LE(reps[0].success_rate, 1.0);
  std::filesystem::remove_all(dir);
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}
