#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "romilab/dataset/buffer.h"
#include "romilab/dynamics/model.h"
#include "romilab/env/maze.h"
#include "romilab/rollout/policy.h"

namespace romilab::rollout {

struct ImaginationConfig {
  int horizon = 5;
  dyn::Direction direction = dyn::Direction::reverse;
  std::size_t n_rollouts = 0;  // 0 = one rollout per anchor transition
  data::PriorityMode start_mode = data::PriorityMode::uniform;
  double priority_temperature = 1.0;
};

struct RolloutReport {
  std::size_t n_rollouts = 0;
  int horizon = 0;
  std::string direction;
  std::string start_mode;
  std::string policy;
  std::size_t transitions = 0;
  std::size_t full_length = 0;            // ran all h steps
  std::size_t truncated_model_no_data = 0;
  std::size_t truncated_policy_no_data = 0;
  std::size_t truncated_out_of_bounds = 0;
  std::size_t stopped_at_terminal = 0;   // forward rollouts ending in the goal
  std::vector<std::size_t> length_histogram;  // index = emitted length

  nlohmann::json to_json() const;
};

struct ImaginationResult {
  // Transitions with origin=model, grouped by rollout; episode_boundaries
  // close each non-empty rollout.
  data::TransitionBuffer buffer;
  std::vector<State> anchors;                 // per non-empty rollout
  std::vector<std::size_t> anchor_transition; // dataset index the anchor came from
  RolloutReport report;
};

// Reverse: launch from s_next of a dataset transition and chain backward,
// emitting (s, a, r, current) with current <- s. Forward: launch from s and
// chain forward. Rollouts truncate on no-data from the policy or the model
// and before any predicted state leaving the maze bounding box. done flags
// come from the goal test on each transition's s_next; forward rollouts stop
// after a done transition. Rollout i draws from Rng(derive_seed(seed, i)),
// so the output does not depend on `jobs`.
ImaginationResult imagine(const dyn::DynamicsModel& model, const RolloutPolicy& policy,
                          const data::TransitionBuffer& anchors, const std::vector<double>& weights,
                          const ImaginationConfig& cfg, const env::MazeSpec& spec,
                          std::uint64_t seed, int jobs = 1);

// Convenience: weights from cfg.start_mode over `anchors`.
ImaginationResult imagine(const dyn::DynamicsModel& model, const RolloutPolicy& policy,
                          const data::TransitionBuffer& anchors, const ImaginationConfig& cfg,
                          const env::MazeSpec& spec, std::uint64_t seed, int jobs = 1);

}  // namespace romilab::rollout
