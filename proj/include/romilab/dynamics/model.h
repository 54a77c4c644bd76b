#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "romilab/core/rng.h"
#include "romilab/core/types.h"

namespace romilab::dyn {

// reverse: condition on s' and predict the predecessor s.
// forward: condition on s and predict the successor s'.
enum class Direction { reverse, forward };
std::string to_string(Direction d);
Direction parse_direction(std::string_view s);

struct Prediction {
  State state;  // predicted s (reverse) or s' (forward)
  double reward = 0.0;
};

// Common interface of learned one-step models. std::nullopt is the no-data
// signal: the model has nothing to say about this (state, action) pair.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual Direction direction() const = 0;
  virtual std::optional<Prediction> sample(const State& cond, const Action& a, Rng& rng) const = 0;
  // Expected predicted state, used for one-step error measurement.
  virtual std::optional<State> mean_state(const State& cond, const Action& a) const = 0;
};

}  // namespace romilab::dyn
