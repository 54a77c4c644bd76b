#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "romilab/core/rng.h"
#include "romilab/core/types.h"

namespace romilab::env {

enum class RewardMode { sparse, dense };
enum class SpaceKind { grid, point };
enum class CollisionRule { terminal_failure };

std::string to_string(RewardMode m);
std::string to_string(SpaceKind k);
RewardMode parse_reward_mode(std::string_view s);
SpaceKind parse_space_kind(std::string_view s);

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

struct Segment {
  double x0, y0, x1, y1;
};

// Point-mass integrator and goal parameters. Positions use x = column axis,
// y = row axis, one cell = 1.0 unit.
struct PointParams {
  double dt = 0.1;
  double drag = 0.1;
  double max_speed = 2.0;
  double goal_radius = 0.5;
};

struct MazeSpec {
  std::string layout_id;
  SpaceKind space = SpaceKind::grid;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> blocked;  // row-major
  std::vector<Cell> goal_cells;
  RewardMode reward_mode = RewardMode::sparse;
  int episode_limit = 100;
  CollisionRule collision_rule = CollisionRule::terminal_failure;
  bool terminate_on_goal = true;
  double reward_sigma = 1.0;
  PointParams point;
  std::vector<Segment> walls;  // point mazes only
  std::array<double, 2> goal_center{};  // point mazes only, (x, y)

  bool is_blocked(int row, int col) const;
  bool in_grid(int row, int col) const {
    return row >= 0 && row < rows && col >= 0 && col < cols;
  }
  bool is_goal_cell(int row, int col) const;
  std::vector<Cell> free_cells() const;
  int action_count() const;        // discrete actions (grid) or 0
  std::size_t state_dim() const;   // 2 (grid) or 4 (point)
  std::size_t action_dim() const;  // 1 (grid index) or 2 (force)
};

// Parses an ASCII layout: '#' wall, '.' free, 'G' goal; one row per line.
MazeSpec parse_layout(std::string_view ascii, std::string layout_id,
                      SpaceKind space = SpaceKind::grid,
                      RewardMode mode = RewardMode::sparse, int episode_limit = 100);

MazeSpec load_layout_file(const std::string& path, SpaceKind space, RewardMode mode,
                          int episode_limit);

// Bundled layouts: "umaze", "medium", "large", "open5".
MazeSpec builtin_layout(std::string_view name, SpaceKind space = SpaceKind::grid,
                        RewardMode mode = RewardMode::sparse);
std::string_view builtin_layout_ascii(std::string_view name);
int default_episode_limit(std::string_view name, SpaceKind space);

// Throws PreconditionError when the spec violates its invariants.
void validate(const MazeSpec& spec);

struct StepOutcome {
  State next_state;
  double reward = 0.0;
  bool done = false;
  bool collided = false;
};

bool is_valid_state(const MazeSpec& spec, const State& s);
bool in_goal(const MazeSpec& spec, const State& s);
bool in_bounding_box(const MazeSpec& spec, const State& s);
double distance_to_goal(const MazeSpec& spec, const State& s);

StepOutcome step(const MazeSpec& spec, const State& s, const Action& a);
State sample_start(const MazeSpec& spec, Rng& rng);

// Cell containing a state (point mazes) or the state's cell (grid).
Cell cell_of(const MazeSpec& spec, const State& s);

bool segments_intersect(const Segment& a, const Segment& b);

}  // namespace romilab::env
