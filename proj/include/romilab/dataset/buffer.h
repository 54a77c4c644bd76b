#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "romilab/core/rng.h"
#include "romilab/core/types.h"

namespace romilab::data {

enum class Origin : std::uint8_t { env = 0, model = 1 };

struct Transition {
  State s;
  Action a;
  double r = 0.0;
  State s_next;
  bool done = false;
  bool collided = false;
  Origin origin = Origin::env;

  bool operator==(const Transition&) const = default;
};

// Ordered transitions plus episode end offsets (exclusive, strictly
// increasing, last one <= size()).
struct TransitionBuffer {
  std::vector<Transition> transitions;
  std::vector<std::size_t> episode_boundaries;
  std::string layout_id;
  std::uint64_t seed = 0;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
  const Transition& operator[](std::size_t i) const { return transitions[i]; }

  void push(const Transition& t) { transitions.push_back(t); }
  // Closes the current episode at size(); no-op when it would be empty.
  void end_episode();
  // Throws PreconditionError if the boundary or origin invariants fail.
  void check_invariants() const;
  // [begin, end) index ranges of each episode; transitions past the last
  // boundary form a trailing episode.
  std::vector<std::pair<std::size_t, std::size_t>> episodes() const;
};

struct HoldoutSplit {
  TransitionBuffer train;
  TransitionBuffer holdout;
};

// Uniform split without replacement. Both parts keep the input order of
// their members; episode boundaries are dropped.
HoldoutSplit split_holdout(const TransitionBuffer& buf, std::size_t n_holdout, Rng& rng);

inline constexpr double kStdFloor = 1e-6;

struct NormStats {
  std::vector<double> state_mean, state_std;
  std::vector<double> action_mean, action_std;
  double reward_mean = 0.0, reward_std = 1.0;
};

// Population (1/N) statistics of s, a and r; std floored at kStdFloor.
NormStats compute_norm_stats(const TransitionBuffer& buf);

// Per-dimension statistics of arbitrary row vectors, population convention.
void column_stats(const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                  std::vector<double>& stdev);

// Action features seen by learned models: the 2-vector `u` (grid moves are
// their unit direction, point actions their force).
inline constexpr std::size_t kActionFeatureDim = 2;

enum class PriorityMode { uniform, return_weighted };
PriorityMode parse_priority_mode(const std::string& s);
std::string to_string(PriorityMode m);

// Normalized per-transition sampling weights; return_weighted applies a
// softmax over episode returns with temperature `temperature`.
std::vector<double> priority_weights(const TransitionBuffer& buf, PriorityMode mode,
                                     double temperature = 1.0);

// Draws batches with exactly round(eta * B) model transitions.
class MixedSampler {
 public:
  MixedSampler(const TransitionBuffer& env_buffer, const TransitionBuffer& model_buffer,
               double eta, Rng rng);

  std::vector<Transition> sample(std::size_t batch_size);
  static std::size_t model_share(double eta, std::size_t batch_size);

  const TransitionBuffer& env_buffer() const { return env_; }
  const TransitionBuffer& model_buffer() const { return model_; }
  double eta() const { return eta_; }

 private:
  const TransitionBuffer& env_;
  const TransitionBuffer& model_;
  double eta_;
  Rng rng_;
};

}  // namespace romilab::data
