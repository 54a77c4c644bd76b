#include "romilab/rollout/imagine.h"

#include <algorithm>
#include <thread>

#include "romilab/core/error.h"

namespace romilab::rollout {

nlohmann::json RolloutReport::to_json() const {
  return {{"n_rollouts", n_rollouts},
          {"horizon", horizon},
          {"direction", direction},
          {"start_mode", start_mode},
          {"policy", policy},
          {"transitions", transitions},
          {"full_length", full_length},
          {"truncated",
           {{"model_no_data", truncated_model_no_data},
            {"policy_no_data", truncated_policy_no_data},
            {"out_of_bounds", truncated_out_of_bounds}}},
          {"stopped_at_terminal", stopped_at_terminal},
          {"length_histogram", length_histogram}};
}

namespace {

enum class End { full, model_no_data, policy_no_data, out_of_bounds, terminal };

struct OneRollout {
  std::vector<data::Transition> steps;
  State anchor;
  std::size_t anchor_index = 0;
  End end = End::full;
};

OneRollout run_one(const dyn::DynamicsModel& model, const RolloutPolicy& policy,
                   const data::TransitionBuffer& anchors, const std::vector<double>& cumulative,
                   const ImaginationConfig& cfg, const env::MazeSpec& spec, Rng& rng) {
  OneRollout out;
  const double u = uniform01(rng) * cumulative.back();
  out.anchor_index = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin(),
                               static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
  const bool rev = cfg.direction == dyn::Direction::reverse;
  const auto& src = anchors[out.anchor_index];
  out.anchor = rev ? src.s_next : src.s;
  State cur = out.anchor;
  for (int i = 0; i < cfg.horizon; ++i) {
    const auto a = policy.sample(cur, rng);
    if (!a) {
      out.end = End::policy_no_data;
      return out;
    }
    const auto p = model.sample(cur, *a, rng);
    if (!p) {
      out.end = End::model_no_data;
      return out;
    }
    if (!env::in_bounding_box(spec, p->state)) {
      out.end = End::out_of_bounds;
      return out;
    }
    data::Transition t;
    t.a = *a;
    t.r = p->reward;
    t.origin = data::Origin::model;
    if (rev) {
      t.s = p->state;
      t.s_next = cur;
    } else {
      t.s = cur;
      t.s_next = p->state;
    }
    t.done = env::in_goal(spec, t.s_next);
    out.steps.push_back(t);
    cur = p->state;
    if (!rev && t.done) {
      out.end = End::terminal;
      return out;
    }
  }
  return out;
}

}  // namespace

ImaginationResult imagine(const dyn::DynamicsModel& model, const RolloutPolicy& policy,
                          const data::TransitionBuffer& anchors, const std::vector<double>& weights,
                          const ImaginationConfig& cfg, const env::MazeSpec& spec,
                          std::uint64_t seed, int jobs) {
  if (cfg.horizon < 1) throw ConfigError("rollout horizon must be >= 1");
  if (anchors.empty()) throw PreconditionError("imagination needs a non-empty anchor buffer");
  if (weights.size() != anchors.size()) throw SizeError("one weight per anchor transition required");
  if (model.direction() != cfg.direction)
    throw PreconditionError("model direction disagrees with the imagination config");
  const std::size_t n = cfg.n_rollouts > 0 ? cfg.n_rollouts : anchors.size();

  std::vector<double> cumulative(weights.size());
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0)) throw PreconditionError("anchor weights must be non-negative");
    acc += weights[i];
    cumulative[i] = acc;
  }
  if (!(acc > 0)) throw PreconditionError("anchor weights sum to zero");

  std::vector<OneRollout> results(n);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      results[i] = run_one(model, policy, anchors, cumulative, cfg, spec, rng);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs < 1 ? 1 : static_cast<std::size_t>(jobs), 1, n);
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(work, std::min(n, w * chunk), std::min(n, (w + 1) * chunk));
    for (auto& t : pool) t.join();
  }

  ImaginationResult res;
  auto& buf = res.buffer;
  buf.layout_id = anchors.layout_id;
  buf.seed = seed;
  buf.state_dim = anchors.state_dim;
  buf.action_dim = anchors.action_dim;
  auto& rep = res.report;
  rep.n_rollouts = n;
  rep.horizon = cfg.horizon;
  rep.direction = dyn::to_string(cfg.direction);
  rep.start_mode = data::to_string(cfg.start_mode);
  rep.policy = to_string(policy.kind());
  rep.length_histogram.assign(static_cast<std::size_t>(cfg.horizon) + 1, 0);
  for (auto& r : results) {
    ++rep.length_histogram[r.steps.size()];
    switch (r.end) {
      case End::full: ++rep.full_length; break;
      case End::model_no_data: ++rep.truncated_model_no_data; break;
      case End::policy_no_data: ++rep.truncated_policy_no_data; break;
      case End::out_of_bounds: ++rep.truncated_out_of_bounds; break;
      case End::terminal: ++rep.stopped_at_terminal; break;
    }
    if (r.steps.empty()) continue;
    for (auto& t : r.steps) buf.push(t);
    buf.end_episode();
    res.anchors.push_back(r.anchor);
    res.anchor_transition.push_back(r.anchor_index);
  }
  rep.transitions = buf.size();
  return res;
}

ImaginationResult imagine(const dyn::DynamicsModel& model, const RolloutPolicy& policy,
                          const data::TransitionBuffer& anchors, const ImaginationConfig& cfg,
                          const env::MazeSpec& spec, std::uint64_t seed, int jobs) {
  return imagine(model, policy, anchors,
                 data::priority_weights(anchors, cfg.start_mode, cfg.priority_temperature), cfg, spec,
                 seed, jobs);
}

}  // namespace romilab::rollout
