#include "romilab/env/maze.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#include "romilab/core/error.h"

namespace romilab {

std::string to_string(const State& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.dim; ++i) {
    if (i) os << ',';
    os << s.v[i];
  }
  os << ')';
  return os.str();
}

std::string to_string(const Action& a) {
  std::ostringstream os;
  if (a.is_discrete())
    os << 'a' << a.index;
  else
    os << '(' << a.u[0] << ',' << a.u[1] << ')';
  return os.str();
}

}  // namespace romilab

namespace romilab::env {

namespace {

constexpr std::string_view kUmaze =
    "##########\n"
    "#GG......#\n"
    "#GG......#\n"
    "######...#\n"
    "#........#\n"
    "#........#\n"
    "##########\n";

constexpr std::string_view kMedium =
    "########\n"
    "#..##..#\n"
    "#..#...#\n"
    "##...###\n"
    "#..#...#\n"
    "#.#..#.#\n"
    "#...#.G#\n"
    "########\n";

constexpr std::string_view kLarge =
    "############\n"
    "#....#.....#\n"
    "#.##.#.#.#.#\n"
    "#......#...#\n"
    "#.####.###.#\n"
    "#..#.#.....#\n"
    "##.#.#.#.###\n"
    "#..#...#.G.#\n"
    "############\n";

constexpr std::string_view kOpen5 =
    ".....\n"
    ".....\n"
    ".....\n"
    ".....\n"
    "....G\n";

void build_point_geometry(MazeSpec& spec) {
  spec.walls.clear();
  auto blocked_or_outside = [&](int r, int c) {
    return !spec.in_grid(r, c) || spec.is_blocked(r, c);
  };
  // Edges between a free cell and a blocked/outside neighbour.
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      if (spec.is_blocked(r, c)) continue;
      const double x = c, y = r;
      if (blocked_or_outside(r - 1, c)) spec.walls.push_back({x, y, x + 1, y});
      if (blocked_or_outside(r + 1, c)) spec.walls.push_back({x, y + 1, x + 1, y + 1});
      if (blocked_or_outside(r, c - 1)) spec.walls.push_back({x, y, x, y + 1});
      if (blocked_or_outside(r, c + 1)) spec.walls.push_back({x + 1, y, x + 1, y + 1});
    }
  }
  double sx = 0, sy = 0;
  for (const auto& g : spec.goal_cells) {
    sx += g.col + 0.5;
    sy += g.row + 0.5;
  }
  const double n = static_cast<double>(spec.goal_cells.size());
  spec.goal_center = {sx / n, sy / n};
}

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

}  // namespace

std::string to_string(RewardMode m) { return m == RewardMode::sparse ? "sparse" : "dense"; }
std::string to_string(SpaceKind k) { return k == SpaceKind::grid ? "grid" : "point"; }

RewardMode parse_reward_mode(std::string_view s) {
  if (s == "sparse") return RewardMode::sparse;
  if (s == "dense") return RewardMode::dense;
  throw ConfigError("unknown reward mode '" + std::string(s) + "'");
}

SpaceKind parse_space_kind(std::string_view s) {
  if (s == "grid") return SpaceKind::grid;
  if (s == "point") return SpaceKind::point;
  throw ConfigError("unknown space kind '" + std::string(s) + "'");
}

bool MazeSpec::is_blocked(int row, int col) const {
  return blocked[static_cast<std::size_t>(row) * cols + col] != 0;
}

bool MazeSpec::is_goal_cell(int row, int col) const {
  return std::find(goal_cells.begin(), goal_cells.end(), Cell{row, col}) != goal_cells.end();
}

std::vector<Cell> MazeSpec::free_cells() const {
  std::vector<Cell> out;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!is_blocked(r, c)) out.push_back({r, c});
  return out;
}

int MazeSpec::action_count() const { return space == SpaceKind::grid ? kGridActions : 0; }
std::size_t MazeSpec::state_dim() const { return space == SpaceKind::grid ? 2 : 4; }
std::size_t MazeSpec::action_dim() const { return space == SpaceKind::grid ? 1 : 2; }

MazeSpec parse_layout(std::string_view ascii, std::string layout_id, SpaceKind space,
                      RewardMode mode, int episode_limit) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : ascii) {
    if (ch == '\r') continue;
    if (ch == '\n') {
      if (!cur.empty()) lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  if (lines.empty()) throw ConfigError("layout '" + layout_id + "' is empty");

  MazeSpec spec;
  spec.layout_id = std::move(layout_id);
  spec.space = space;
  spec.reward_mode = mode;
  spec.episode_limit = episode_limit;
  spec.rows = static_cast<int>(lines.size());
  spec.cols = static_cast<int>(lines.front().size());
  spec.blocked.assign(static_cast<std::size_t>(spec.rows) * spec.cols, 0);
  for (int r = 0; r < spec.rows; ++r) {
    if (static_cast<int>(lines[r].size()) != spec.cols)
      throw ConfigError("layout '" + spec.layout_id + "' has ragged rows");
    for (int c = 0; c < spec.cols; ++c) {
      switch (lines[r][c]) {
        case '#': spec.blocked[static_cast<std::size_t>(r) * spec.cols + c] = 1; break;
        case '.': break;
        case 'G': spec.goal_cells.push_back({r, c}); break;
        default:
          throw ConfigError("layout '" + spec.layout_id + "' has unknown glyph '" +
                            std::string(1, lines[r][c]) + "'");
      }
    }
  }
  if (space == SpaceKind::point) build_point_geometry(spec);
  validate(spec);
  return spec;
}

MazeSpec load_layout_file(const std::string& path, SpaceKind space, RewardMode mode,
                          int episode_limit) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layout file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string id = path;
  if (auto slash = id.find_last_of('/'); slash != std::string::npos) id = id.substr(slash + 1);
  if (auto dot = id.find_last_of('.'); dot != std::string::npos) id = id.substr(0, dot);
  return parse_layout(ss.str(), id, space, mode, episode_limit);
}

std::string_view builtin_layout_ascii(std::string_view name) {
  if (name == "umaze") return kUmaze;
  if (name == "medium") return kMedium;
  if (name == "large") return kLarge;
  if (name == "open5") return kOpen5;
  throw ConfigError("unknown layout '" + std::string(name) + "'");
}

int default_episode_limit(std::string_view name, SpaceKind space) {
  if (space == SpaceKind::grid) {
    if (name == "umaze") return 60;
    if (name == "medium") return 120;
    if (name == "large") return 160;
    return 50;
  }
  if (name == "umaze") return 300;
  if (name == "medium") return 600;
  if (name == "large") return 800;
  return 200;
}

MazeSpec builtin_layout(std::string_view name, SpaceKind space, RewardMode mode) {
  return parse_layout(builtin_layout_ascii(name), std::string(name), space, mode,
                      default_episode_limit(name, space));
}

void validate(const MazeSpec& spec) {
  if (spec.episode_limit < 1) throw PreconditionError("episode_limit must be >= 1");
  if (spec.goal_cells.empty()) throw PreconditionError("layout has no goal cell");
  for (const auto& g : spec.goal_cells)
    if (spec.is_blocked(g.row, g.col)) throw PreconditionError("goal overlaps a wall");
  // Every free cell must reach the goal through free cells.
  std::vector<std::uint8_t> seen(spec.blocked.size(), 0);
  std::deque<Cell> q(spec.goal_cells.begin(), spec.goal_cells.end());
  for (const auto& g : spec.goal_cells) seen[static_cast<std::size_t>(g.row) * spec.cols + g.col] = 1;
  while (!q.empty()) {
    Cell c = q.front();
    q.pop_front();
    for (const auto& m : kGridMoves) {
      int r = c.row + m[0], k = c.col + m[1];
      if (!spec.in_grid(r, k) || spec.is_blocked(r, k)) continue;
      auto idx = static_cast<std::size_t>(r) * spec.cols + k;
      if (seen[idx]) continue;
      seen[idx] = 1;
      q.push_back({r, k});
    }
  }
  for (const auto& c : spec.free_cells())
    if (!seen[static_cast<std::size_t>(c.row) * spec.cols + c.col])
      throw PreconditionError("layout '" + spec.layout_id + "' has a free cell cut off from the goal");
}

Cell cell_of(const MazeSpec& spec, const State& s) {
  if (spec.space == SpaceKind::grid) return {s.row(), s.col()};
  return {static_cast<int>(std::floor(s.y())), static_cast<int>(std::floor(s.x()))};
}

bool in_bounding_box(const MazeSpec& spec, const State& s) {
  if (spec.space == SpaceKind::grid) {
    return s.v[0] > -0.5 && s.v[0] < spec.rows - 0.5 && s.v[1] > -0.5 && s.v[1] < spec.cols - 0.5;
  }
  return s.x() >= 0.0 && s.x() <= spec.cols && s.y() >= 0.0 && s.y() <= spec.rows;
}

bool is_valid_state(const MazeSpec& spec, const State& s) {
  if (s.dim != spec.state_dim()) return false;
  for (std::size_t i = 0; i < s.dim; ++i)
    if (!std::isfinite(s.v[i])) return false;
  if (!in_bounding_box(spec, s)) return false;
  if (spec.space == SpaceKind::grid) {
    if (s.v[0] != std::round(s.v[0]) || s.v[1] != std::round(s.v[1])) return false;
    return !spec.is_blocked(s.row(), s.col());
  }
  Cell c = cell_of(spec, s);
  c.row = std::clamp(c.row, 0, spec.rows - 1);
  c.col = std::clamp(c.col, 0, spec.cols - 1);
  return !spec.is_blocked(c.row, c.col);
}

double distance_to_goal(const MazeSpec& spec, const State& s) {
  if (spec.space == SpaceKind::grid) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : spec.goal_cells)
      best = std::min(best, std::hypot(s.v[0] - g.row, s.v[1] - g.col));
    return best;
  }
  const double d = std::hypot(s.x() - spec.goal_center[0], s.y() - spec.goal_center[1]);
  return std::max(0.0, d - spec.point.goal_radius);
}

bool in_goal(const MazeSpec& spec, const State& s) {
  if (spec.space == SpaceKind::grid) return spec.is_goal_cell(s.row(), s.col());
  return std::hypot(s.x() - spec.goal_center[0], s.y() - spec.goal_center[1]) <=
         spec.point.goal_radius;
}

bool segments_intersect(const Segment& a, const Segment& b) {
  const double rx = a.x1 - a.x0, ry = a.y1 - a.y0;
  const double sx = b.x1 - b.x0, sy = b.y1 - b.y0;
  const double qpx = b.x0 - a.x0, qpy = b.y0 - a.y0;
  const double denom = cross(rx, ry, sx, sy);
  constexpr double eps = 1e-12;
  if (std::abs(denom) < eps) {
    if (std::abs(cross(qpx, qpy, rx, ry)) > eps) return false;  // parallel, apart
    // Collinear: overlap of projections onto a.
    const double rr = rx * rx + ry * ry;
    if (rr < eps) {
      // a is a point: on b?
      const double ss = sx * sx + sy * sy;
      const double t = ss < eps ? 0.0 : ((a.x0 - b.x0) * sx + (a.y0 - b.y0) * sy) / ss;
      return t >= -eps && t <= 1 + eps &&
             std::hypot(b.x0 + t * sx - a.x0, b.y0 + t * sy - a.y0) < 1e-9;
    }
    const double t0 = (qpx * rx + qpy * ry) / rr;
    const double t1 = t0 + (sx * rx + sy * ry) / rr;
    return std::max(std::min(t0, t1), 0.0) <= std::min(std::max(t0, t1), 1.0) + eps;
  }
  const double t = cross(qpx, qpy, sx, sy) / denom;
  const double u = cross(qpx, qpy, rx, ry) / denom;
  return t >= -eps && t <= 1 + eps && u >= -eps && u <= 1 + eps;
}

namespace {

double reward_at(const MazeSpec& spec, const State& next) {
  if (spec.reward_mode == RewardMode::sparse) return in_goal(spec, next) ? 1.0 : 0.0;
  return std::exp(-distance_to_goal(spec, next) / spec.reward_sigma);
}

StepOutcome grid_step(const MazeSpec& spec, const State& s, const Action& a) {
  if (a.index < 0 || a.index >= kGridActions)
    throw PreconditionError("grid action index out of range: " + to_string(a));
  const int r = s.row() + kGridMoves[a.index][0];
  const int c = s.col() + kGridMoves[a.index][1];
  StepOutcome out;
  if (!spec.in_grid(r, c) || spec.is_blocked(r, c)) {
    out.next_state = s;
    out.collided = true;
    out.done = true;
    return out;
  }
  out.next_state = State::cell(r, c);
  out.reward = reward_at(spec, out.next_state);
  out.done = spec.terminate_on_goal && in_goal(spec, out.next_state);
  return out;
}

StepOutcome point_step(const MazeSpec& spec, const State& s, const Action& a) {
  const auto& p = spec.point;
  const double fx = std::clamp(a.u[0], -1.0, 1.0);
  const double fy = std::clamp(a.u[1], -1.0, 1.0);
  double vx = s.v[2] + (fx - p.drag * s.v[2]) * p.dt;
  double vy = s.v[3] + (fy - p.drag * s.v[3]) * p.dt;
  const double speed = std::hypot(vx, vy);
  if (speed > p.max_speed) {
    vx *= p.max_speed / speed;
    vy *= p.max_speed / speed;
  }
  const double nx = s.x() + vx * p.dt;
  const double ny = s.y() + vy * p.dt;
  const Segment sweep{s.x(), s.y(), nx, ny};
  StepOutcome out;
  bool hit = nx < 0 || ny < 0 || nx > spec.cols || ny > spec.rows;
  for (std::size_t i = 0; !hit && i < spec.walls.size(); ++i)
    hit = segments_intersect(sweep, spec.walls[i]);
  if (hit) {
    out.next_state = State::point(s.x(), s.y(), 0.0, 0.0);
    out.collided = true;
    out.done = true;
    return out;
  }
  out.next_state = State::point(nx, ny, vx, vy);
  out.reward = reward_at(spec, out.next_state);
  out.done = spec.terminate_on_goal && in_goal(spec, out.next_state);
  return out;
}

}  // namespace

StepOutcome step(const MazeSpec& spec, const State& s, const Action& a) {
  if (!is_valid_state(spec, s))
    throw PreconditionError("state " + to_string(s) + " is not valid for layout " + spec.layout_id);
  return spec.space == SpaceKind::grid ? grid_step(spec, s, a) : point_step(spec, s, a);
}

State sample_start(const MazeSpec& spec, Rng& rng) {
  const auto cells = spec.free_cells();
  const Cell c = cells[uniform_index(rng, cells.size())];
  if (spec.space == SpaceKind::grid) return State::cell(c.row, c.col);
  // Uniform inside the cell, kept off the cell boundary so the start never
  // lies exactly on a wall segment.
  constexpr double margin = 0.05;
  const double x = c.col + margin + (1 - 2 * margin) * uniform01(rng);
  const double y = c.row + margin + (1 - 2 * margin) * uniform01(rng);
  return State::point(x, y, 0.0, 0.0);
}

}  // namespace romilab::env
