#include "romilab/env/planner.h"

#include <algorithm>
#include <cmath>
#include <deque>

#include "romilab/core/error.h"

namespace romilab::env {

namespace {

int grid_action_between(Cell a, Cell b) {
  for (int k = 0; k < kGridActions; ++k)
    if (a.row + kGridMoves[k][0] == b.row && a.col + kGridMoves[k][1] == b.col) return k;
  throw StateError("cells are not 4-adjacent");
}

bool passable(const MazeSpec& spec, int r, int c) { return spec.in_grid(r, c) && !spec.is_blocked(r, c); }

Cell draw_waypoint(const std::vector<Cell>& free, Cell here, Rng& rng) {
  for (;;) {
    const Cell c = free[uniform_index(rng, free.size())];
    if (c != here) return c;
  }
}

data::TransitionBuffer empty_buffer(const MazeSpec& spec) {
  data::TransitionBuffer buf;
  buf.layout_id = spec.layout_id;
  buf.state_dim = spec.state_dim();
  buf.action_dim = spec.action_dim();
  return buf;
}

data::Transition make_transition(const State& s, const Action& a, const StepOutcome& out) {
  data::Transition t;
  t.s = s;
  t.a = a;
  t.r = out.reward;
  t.s_next = out.next_state;
  t.done = out.done;
  t.collided = out.collided;
  return t;
}

data::TransitionBuffer generate_grid(const MazeSpec& spec, std::size_t n, const PlannerConfig& cfg,
                                     Rng& rng) {
  const auto free = spec.free_cells();
  auto buf = empty_buffer(spec);
  buf.transitions.reserve(n);
  State cur = sample_start(spec, rng);
  int steps = 0;
  while (buf.size() < n) {
    const Cell here = cell_of(spec, cur);
    std::vector<Cell> path;
    for (int draw = 0; path.empty(); ++draw) {
      if (draw >= cfg.max_waypoint_draws) throw StateError("no reachable waypoint found");
      path = bfs_path(spec, here, draw_waypoint(free, here, rng), &rng);
    }
    for (std::size_t i = 1; i < path.size() && buf.size() < n; ++i) {
      const Action a = Action::discrete(grid_action_between(path[i - 1], path[i]));
      const StepOutcome out = step(spec, cur, a);
      if (out.collided) throw StateError("planner path walked into a wall");
      buf.push(make_transition(cur, a, out));
      cur = out.next_state;
      if (out.done || ++steps >= spec.episode_limit) {
        buf.end_episode();
        steps = 0;
      }
    }
  }
  buf.end_episode();
  return buf;
}

data::TransitionBuffer generate_point(const MazeSpec& spec, std::size_t n, const PlannerConfig& cfg,
                                      Rng& rng) {
  const auto free = spec.free_cells();
  auto buf = empty_buffer(spec);
  buf.transitions.reserve(n);
  State cur = sample_start(spec, rng);
  int steps = 0;
  // A target the controller cannot reach within this many steps is dropped.
  constexpr int kStuckSteps = 200;
  while (buf.size() < n) {
    const Cell here = cell_of(spec, cur);
    std::vector<Cell> path;
    for (int draw = 0; path.empty(); ++draw) {
      if (draw >= cfg.max_waypoint_draws) throw StateError("no reachable waypoint found");
      path = bfs_path(spec, here, draw_waypoint(free, here, rng), &rng);
    }
    std::size_t idx = 1;
    int on_target = 0;
    while (idx < path.size() && buf.size() < n) {
      const double tx = path[idx].col + 0.5, ty = path[idx].row + 0.5;
      if (std::hypot(tx - cur.x(), ty - cur.y()) < cfg.switch_radius) {
        ++idx;
        on_target = 0;
        continue;
      }
      if (++on_target > kStuckSteps) break;
      Action a = pd_force(spec, cur, tx, ty, cfg);
      if (cfg.action_noise > 0) {
        a.u[0] = std::clamp(a.u[0] + cfg.action_noise * standard_normal(rng), -1.0, 1.0);
        a.u[1] = std::clamp(a.u[1] + cfg.action_noise * standard_normal(rng), -1.0, 1.0);
      }
      const StepOutcome out = step(spec, cur, a);
      if (out.collided) {
        buf.end_episode();
        steps = 0;
        cur = sample_start(spec, rng);
        break;
      }
      buf.push(make_transition(cur, a, out));
      cur = out.next_state;
      if (out.done || ++steps >= spec.episode_limit) {
        buf.end_episode();
        steps = 0;
      }
    }
  }
  buf.end_episode();
  return buf;
}

}  // namespace

std::vector<Cell> bfs_path(const MazeSpec& spec, Cell from, Cell to, Rng* rng) {
  if (!passable(spec, from.row, from.col) || !passable(spec, to.row, to.col)) return {};
  const auto idx = [&](Cell c) { return static_cast<std::size_t>(c.row) * spec.cols + c.col; };
  std::vector<int> parent(static_cast<std::size_t>(spec.rows) * spec.cols, -1);
  std::vector<std::uint8_t> seen(parent.size(), 0);
  std::deque<Cell> q{from};
  seen[idx(from)] = 1;
  std::array<int, kGridActions> order{0, 1, 2, 3};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    if (c == to) break;
    if (rng) std::shuffle(order.begin(), order.end(), *rng);
    for (int k : order) {
      const Cell nb{c.row + kGridMoves[k][0], c.col + kGridMoves[k][1]};
      if (!passable(spec, nb.row, nb.col) || seen[idx(nb)]) continue;
      seen[idx(nb)] = 1;
      parent[idx(nb)] = static_cast<int>(idx(c));
      q.push_back(nb);
    }
  }
  if (!seen[idx(to)]) return {};
  std::vector<Cell> path{to};
  while (path.back() != from) {
    const int p = parent[idx(path.back())];
    path.push_back({p / spec.cols, p % spec.cols});
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> goal_distance_field(const MazeSpec& spec) {
  std::vector<int> dist(static_cast<std::size_t>(spec.rows) * spec.cols, -1);
  std::deque<Cell> q;
  for (const auto& g : spec.goal_cells) {
    dist[static_cast<std::size_t>(g.row) * spec.cols + g.col] = 0;
    q.push_back(g);
  }
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    const int d = dist[static_cast<std::size_t>(c.row) * spec.cols + c.col];
    for (const auto& m : kGridMoves) {
      const int r = c.row + m[0], k = c.col + m[1];
      if (!passable(spec, r, k)) continue;
      int& slot = dist[static_cast<std::size_t>(r) * spec.cols + k];
      if (slot >= 0) continue;
      slot = d + 1;
      q.push_back({r, k});
    }
  }
  return dist;
}

data::TransitionBuffer generate_behavior_dataset(const MazeSpec& spec, std::size_t n_transitions,
                                                 const PlannerConfig& cfg, Rng& rng) {
  if (n_transitions < 1) throw PreconditionError("n_transitions must be >= 1");
  if (spec.free_cells().size() < 2) throw PreconditionError("planner needs at least two free cells");
  auto buf = spec.space == SpaceKind::grid ? generate_grid(spec, n_transitions, cfg, rng)
                                           : generate_point(spec, n_transitions, cfg, rng);
  buf.check_invariants();
  return buf;
}

Action pd_force(const MazeSpec&, const State& s, double tx, double ty, const PlannerConfig& cfg) {
  const double dx = tx - s.x(), dy = ty - s.y();
  const double d = std::hypot(dx, dy);
  double vdx = 0, vdy = 0;
  if (d > 1e-12) {
    const double speed = std::min(cfg.cruise_speed, cfg.approach_gain * d);
    vdx = speed * dx / d;
    vdy = speed * dy / d;
  }
  return Action::force(std::clamp(cfg.velocity_gain * (vdx - s.v[2]), -1.0, 1.0),
                       std::clamp(cfg.velocity_gain * (vdy - s.v[3]), -1.0, 1.0));
}

GoalPlanner::GoalPlanner(const MazeSpec& spec, PlannerConfig cfg)
    : spec_(spec), cfg_(cfg), dist_(goal_distance_field(spec)) {}

Action GoalPlanner::act(const State& s) const {
  const Cell c = cell_of(spec_, s);
  const auto at = [&](int r, int k) {
    return passable(spec_, r, k) ? dist_[static_cast<std::size_t>(r) * spec_.cols + k] : -1;
  };
  const int here = at(c.row, c.col);
  int best = -1;
  for (int k = 0; k < kGridActions; ++k) {
    const int d = at(c.row + kGridMoves[k][0], c.col + kGridMoves[k][1]);
    if (d >= 0 && (best < 0 || d < at(c.row + kGridMoves[best][0], c.col + kGridMoves[best][1])))
      best = k;
  }
  if (spec_.space == SpaceKind::grid) return Action::discrete(best < 0 ? 0 : best);

  if (here == 0 || best < 0) return pd_force(spec_, s, spec_.goal_center[0], spec_.goal_center[1], cfg_);
  // Follow the axis-aligned corridor through cell centers: move along the
  // path direction while pulling the lateral coordinate onto the center line.
  const double cx = c.col + 0.5, cy = c.row + 0.5;
  const double dir_x = kGridMoves[best][1], dir_y = kGridMoves[best][0];
  double vdx = dir_x * cfg_.cruise_speed, vdy = dir_y * cfg_.cruise_speed;
  if (dir_x == 0) vdx = std::clamp(cfg_.approach_gain * (cx - s.x()), -cfg_.cruise_speed, cfg_.cruise_speed);
  if (dir_y == 0) vdy = std::clamp(cfg_.approach_gain * (cy - s.y()), -cfg_.cruise_speed, cfg_.cruise_speed);
  return Action::force(std::clamp(cfg_.velocity_gain * (vdx - s.v[2]), -1.0, 1.0),
                       std::clamp(cfg_.velocity_gain * (vdy - s.v[3]), -1.0, 1.0));
}

Action random_action(const MazeSpec& spec, Rng& rng) {
  if (spec.space == SpaceKind::grid)
    return Action::discrete(static_cast<int>(uniform_index(rng, kGridActions)));
  return Action::force(2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1);
}

}  // namespace romilab::env
