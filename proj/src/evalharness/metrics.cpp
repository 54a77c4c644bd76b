#include "romilab/evalharness/metrics.h"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "romilab/core/error.h"
#include "romilab/env/planner.h"

namespace romilab::eval {

std::vector<Trajectory> run_episodes(const env::MazeSpec& spec, const ActFn& act, int n_episodes, Rng& rng) {
  if (n_episodes < 0) throw ConfigError("n_episodes must be >= 0");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n_episodes));
  for (int e = 0; e < n_episodes; ++e) {
    Trajectory tr;
    State s = env::sample_start(spec, rng);
    tr.states.push_back(s);
    bool done = false;
    for (int t = 0; t < spec.episode_limit && !done; ++t) {
      const Action a = act(s, rng);
      const auto o = env::step(spec, s, a);
      tr.actions.push_back(a);
      tr.ret += o.reward;
      s = o.next_state;
      tr.states.push_back(s);
      done = o.done;
      if (o.collided) tr.collided = true;
    }
    tr.success = !tr.collided && env::in_goal(spec, s);
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<Trajectory> run_episodes(const env::MazeSpec& spec, const learn::QTable& q,
                                     const learn::LearnerConfig& cfg, int n_episodes, Rng& rng) {
  return run_episodes(
      spec, [&](const State& s, Rng&) { return learn::greedy_action(q, s, cfg); }, n_episodes, rng);
}

void ScoreReference::set(const std::string& key, RefEntry e) {
  if (!(e.ref_max > e.ref_min)) throw ConfigError("score reference '" + key + "' needs ref_max > ref_min");
  entries_[key] = e;
}

const RefEntry& ScoreReference::at(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("no score reference for '" + key + "'");
  return it->second;
}

ScoreReference ScoreReference::d4rl() {
  ScoreReference r;
  r.set("maze2d-umaze|sparse", {23.85, 161.86});
  r.set("maze2d-medium|sparse", {13.13, 277.39});
  r.set("maze2d-large|sparse", {6.7, 273.99});
  r.set("maze2d-umaze|dense", {68.54, 193.66});
  r.set("maze2d-medium|dense", {44.26, 297.46});
  r.set("maze2d-large|dense", {30.57, 303.49});
  return r;
}

std::string ScoreReference::key_for(const env::MazeSpec& spec) {
  return spec.layout_id + "|" + env::to_string(spec.space) + "|" + env::to_string(spec.reward_mode);
}

RefEntry compute_reference(const env::MazeSpec& spec, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("reference needs at least one episode");
  const auto mean_return = [](const std::vector<Trajectory>& ts) {
    double acc = 0;
    for (const auto& t : ts) acc += t.ret;
    return acc / static_cast<double>(ts.size());
  };
  Rng r1 = make_rng(seed, "reference/random");
  const auto rnd = run_episodes(
      spec, [&](const State&, Rng& g) { return env::random_action(spec, g); }, n_episodes, r1);
  const env::GoalPlanner planner(spec);
  Rng r2 = make_rng(seed, "reference/planner");
  const auto exp = run_episodes(
      spec, [&](const State& s, Rng&) { return planner.act(s); }, n_episodes, r2);
  return {mean_return(rnd), mean_return(exp)};
}

double normalize_score(double raw, const RefEntry& ref) {
  if (!(ref.ref_max > ref.ref_min) || !std::isfinite(ref.ref_max) || !std::isfinite(ref.ref_min))
    throw ConfigError("degenerate score reference: ref_max must exceed ref_min");
  return 100.0 * (raw - ref.ref_min) / (ref.ref_max - ref.ref_min);
}

DiscrepancyIndex::DiscrepancyIndex(const data::TransitionBuffer& dataset, bool position_only) {
  if (dataset.empty()) throw PreconditionError("discrepancy against an empty dataset");
  dim_ = position_only ? std::min<std::size_t>(2, dataset.state_dim) : dataset.state_dim;
  if (dim_ == 0) dim_ = dataset[0].s.size();
  std::vector<double> flat;
  flat.reserve(dataset.size() * dim_);
  for (const auto& t : dataset.transitions)
    for (std::size_t d = 0; d < dim_; ++d) flat.push_back(t.s[d]);
  index_ = SpatialIndex(std::move(flat), dim_, 1.0);
}

double DiscrepancyIndex::nearest(const State& s) const { return index_.nearest_distance(s.v.data()); }

double DiscrepancyIndex::atd(const std::vector<State>& traj) const {
  if (traj.empty()) throw PreconditionError("discrepancy of an empty trajectory");
  double acc = 0;
  for (const auto& s : traj) acc += nearest(s);
  return acc / static_cast<double>(traj.size());
}

double average_trajectory_discrepancy(const data::TransitionBuffer& dataset, const std::vector<State>& traj,
                                      bool position_only) {
  return DiscrepancyIndex(dataset, position_only).atd(traj);
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

std::string format_mean_std(const MeanStd& m, int precision) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", precision, m.mean, precision, m.std);
  return buf;
}

EvalReport summarize(const std::string& arm, std::uint64_t seed, const std::vector<Trajectory>& trajs,
                     const DiscrepancyIndex& index, const RefEntry& ref) {
  EvalReport r;
  r.arm = arm;
  r.seeds = {seed};
  r.n_episodes = trajs.size();
  if (trajs.empty()) return r;
  std::vector<double> rets, norm, atd;
  double coll = 0, succ = 0;
  for (const auto& t : trajs) {
    rets.push_back(t.ret);
    norm.push_back(normalize_score(t.ret, ref));
    atd.push_back(index.atd(t.states));
    coll += t.collided ? 1 : 0;
    succ += t.success ? 1 : 0;
  }
  r.raw_return = mean_std(rets);
  r.normalized_score = mean_std(norm);
  r.atd = mean_std(atd);
  r.collision_rate = coll / static_cast<double>(trajs.size());
  r.success_rate = succ / static_cast<double>(trajs.size());
  return r;
}

EvalReport aggregate(const std::string& arm, const std::vector<EvalReport>& per_seed) {
  EvalReport r;
  r.arm = arm;
  if (per_seed.empty()) return r;
  std::vector<double> rets, norm, atd;
  for (const auto& p : per_seed) {
    r.seeds.insert(r.seeds.end(), p.seeds.begin(), p.seeds.end());
    r.n_episodes += p.n_episodes;
    rets.push_back(p.raw_return.mean);
    norm.push_back(p.normalized_score.mean);
    atd.push_back(p.atd.mean);
    r.collision_rate += p.collision_rate;
    r.success_rate += p.success_rate;
  }
  r.raw_return = mean_std(rets);
  r.normalized_score = mean_std(norm);
  r.atd = mean_std(atd);
  r.collision_rate /= static_cast<double>(per_seed.size());
  r.success_rate /= static_cast<double>(per_seed.size());
  return r;
}

std::string eval_csv_header() {
  return "arm,scope,seeds,n_episodes,raw_return_mean,raw_return_std,normalized_score_mean,"
         "normalized_score_std,atd_mean,atd_std,collision_rate,success_rate";
}

std::string eval_csv_row(const EvalReport& r, const std::string& scope) {
  std::ostringstream seeds;
  for (std::size_t i = 0; i < r.seeds.size(); ++i) seeds << (i ? ";" : "") << r.seeds[i];
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.arm.c_str(),
                scope.c_str(), seeds.str().c_str(), r.n_episodes, r.raw_return.mean, r.raw_return.std,
                r.normalized_score.mean, r.normalized_score.std, r.atd.mean, r.atd.std, r.collision_rate,
                r.success_rate);
  return buf;
}

}  // namespace romilab::eval
