#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace romilab {

inline constexpr std::size_t kMaxStateDim = 4;

// A maze state. Grid states carry (row, col); point-mass states carry
// (x, y, vx, vy) in maze units and units per unit time.
struct State {
  std::array<double, kMaxStateDim> v{};
  std::uint8_t dim = 0;

  static State cell(int row, int col) {
    State s;
    s.v = {static_cast<double>(row), static_cast<double>(col), 0.0, 0.0};
    s.dim = 2;
    return s;
  }
  static State point(double x, double y, double vx, double vy) {
    State s;
    s.v = {x, y, vx, vy};
    s.dim = 4;
    return s;
  }
  static State of_dim(std::size_t dim) {
    State s;
    s.dim = static_cast<std::uint8_t>(dim);
    return s;
  }

  int row() const { return static_cast<int>(std::lround(v[0])); }
  int col() const { return static_cast<int>(std::lround(v[1])); }
  double x() const { return v[0]; }
  double y() const { return v[1]; }
  double operator[](std::size_t i) const { return v[i]; }
  double& operator[](std::size_t i) { return v[i]; }
  std::size_t size() const { return dim; }

  auto operator<=>(const State&) const = default;
  bool operator==(const State&) const = default;
};

// Grid moves in (drow, dcol) order: up, down, left, right.
inline constexpr int kGridActions = 4;
inline constexpr std::array<std::array<int, 2>, kGridActions> kGridMoves{
    {{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

// A maze action. Discrete actions carry an index and, for grid moves, the
// unit (drow, dcol) vector in `u`; continuous actions carry a force with
// index == -1.
struct Action {
  int index = -1;
  std::array<double, 2> u{};

  static Action discrete(int idx) {
    Action a;
    a.index = idx;
    if (idx >= 0 && idx < kGridActions) {
      a.u = {static_cast<double>(kGridMoves[idx][0]),
             static_cast<double>(kGridMoves[idx][1])};
    }
    return a;
  }
  static Action force(double fx, double fy) {
    Action a;
    a.u = {fx, fy};
    return a;
  }
  bool is_discrete() const { return index >= 0; }

  auto operator<=>(const Action&) const = default;
  bool operator==(const Action&) const = default;
};

std::string to_string(const State& s);
std::string to_string(const Action& a);

struct StateHash {
  std::size_t operator()(const State& s) const noexcept {
    std::size_t h = s.dim;
    for (std::size_t i = 0; i < s.dim; ++i) {
      h ^= std::hash<double>{}(s.v[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace romilab
