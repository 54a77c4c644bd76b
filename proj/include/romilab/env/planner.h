#pragma once

#include <vector>

#include "romilab/core/rng.h"
#include "romilab/dataset/buffer.h"
#include "romilab/env/maze.h"

namespace romilab::env {

struct PlannerConfig {
  // Point mazes: the controller switches to the next cell center once within
  // this distance of the current one.
  double switch_radius = 0.3;
  double cruise_speed = 0.8;  // desired speed along the path
  double velocity_gain = 4.0; // force = gain * (v_desired - v), clamped
  double approach_gain = 2.0; // desired speed ramps down as gain * distance
  double action_noise = 0.05; // std of Gaussian noise added to each force component
  // Upper bound on attempts to draw a reachable waypoint before giving up.
  int max_waypoint_draws = 1000;
};

// Shortest wall-free 4-connected cell path from `from` to `to` (both
// included), exploring neighbors in an rng-shuffled order so that ties
// between equally short paths are broken at random. Empty when unreachable.
std::vector<Cell> bfs_path(const MazeSpec& spec, Cell from, Cell to, Rng* rng = nullptr);

// BFS step distance from every cell to the nearest goal cell; -1 for blocked
// or unreachable cells. Row-major.
std::vector<int> goal_distance_field(const MazeSpec& spec);

// Waypoint planner rollouts. The stream never idles: on reaching a waypoint
// a new one is drawn. Episodes close at goal arrival (done) and at the
// episode limit; point-maze steps that would collide are dropped and the
// episode restarts from a fresh start state, so the buffer holds no
// collision experience.
data::TransitionBuffer generate_behavior_dataset(const MazeSpec& spec, std::size_t n_transitions,
                                                 const PlannerConfig& cfg, Rng& rng);

// PD force toward a target position for point mazes, clamped to [-1, 1].
Action pd_force(const MazeSpec& spec, const State& s, double tx, double ty,
                const PlannerConfig& cfg);

// Reference behaviors used for score normalization.
class GoalPlanner {
 public:
  GoalPlanner(const MazeSpec& spec, PlannerConfig cfg = {});
  Action act(const State& s) const;

 private:
  const MazeSpec& spec_;
  PlannerConfig cfg_;
  std::vector<int> dist_;
};

Action random_action(const MazeSpec& spec, Rng& rng);

}  // namespace romilab::env
