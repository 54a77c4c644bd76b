#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "romilab/core/rng.h"
#include "romilab/core/spatial.h"
#include "romilab/dataset/buffer.h"
#include "romilab/env/maze.h"
#include "romilab/learner/qlearn.h"

namespace romilab::eval {

struct Trajectory {
  std::vector<State> states;  // s_0 .. s_H
  std::vector<Action> actions;
  double ret = 0.0;
  bool collided = false;
  bool success = false;  // in the goal at the end and no collision
};

using ActFn = std::function<Action(const State&, Rng&)>;

// Runs n episodes from sample_start until done or the episode limit.
std::vector<Trajectory> run_episodes(const env::MazeSpec& spec, const ActFn& act, int n_episodes, Rng& rng);
// Greedy execution of a trained table under the config's execution filter.
std::vector<Trajectory> run_episodes(const env::MazeSpec& spec, const learn::QTable& q,
                                     const learn::LearnerConfig& cfg, int n_episodes, Rng& rng);

struct RefEntry {
  double ref_min = 0.0;
  double ref_max = 1.0;
};

// Keys are "<layout>|<space>|<reward mode>" for in-repo references; the D4RL
// constants use "maze2d-<layout>|<reward mode>".
class ScoreReference {
 public:
  void set(const std::string& key, RefEntry e);
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const RefEntry& at(const std::string& key) const;
  const std::map<std::string, RefEntry>& entries() const { return entries_; }

  // D4RL maze2d reference returns, kept as documentation constants.
  static ScoreReference d4rl();
  static std::string key_for(const env::MazeSpec& spec);

 private:
  std::map<std::string, RefEntry> entries_;
};

// Random-policy and goal-planner mean returns over n seeded episodes.
RefEntry compute_reference(const env::MazeSpec& spec, int n_episodes, std::uint64_t seed);

// 100 * (raw - ref_min) / (ref_max - ref_min). ConfigError unless ref_max > ref_min.
double normalize_score(double raw, const RefEntry& ref);

// Nearest-neighbor index over dataset s-fields. Point mazes use position only.
class DiscrepancyIndex {
 public:
  DiscrepancyIndex(const data::TransitionBuffer& dataset, bool position_only);
  double nearest(const State& s) const;
  // Mean nearest-neighbor distance over the trajectory states.
  double atd(const std::vector<State>& traj) const;

 private:
  std::size_t dim_ = 0;
  SpatialIndex index_;
};

double average_trajectory_discrepancy(const data::TransitionBuffer& dataset, const std::vector<State>& traj,
                                      bool position_only = false);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population convention
};
MeanStd mean_std(const std::vector<double>& xs);
std::string format_mean_std(const MeanStd& m, int precision = 3);

struct EvalReport {
  std::string arm;
  std::vector<std::uint64_t> seeds;
  std::size_t n_episodes = 0;
  MeanStd raw_return;
  MeanStd normalized_score;
  MeanStd atd;
  double collision_rate = 0.0;
  double success_rate = 0.0;
};

// Per-episode statistics of one evaluation run.
EvalReport summarize(const std::string& arm, std::uint64_t seed, const std::vector<Trajectory>& trajs,
                     const DiscrepancyIndex& index, const RefEntry& ref);

// Merges per-seed reports: mean and std are taken over the per-seed means,
// rates are averaged.
EvalReport aggregate(const std::string& arm, const std::vector<EvalReport>& per_seed);

std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& r, const std::string& scope);

}  // namespace romilab::eval
