#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "romilab/core/container.h"
#include "romilab/dataset/buffer.h"
#include "romilab/dynamics/model.h"

namespace romilab::dyn {

// What to do for a (cond, a) pair never observed in training.
//   none:         no-data, unless smoothing spreads mass over the support.
//   displacement: if cond is in the observed state support, shift it by a
//                 displacement drawn from all observed moves of action a.
enum class TabularFallback { none, displacement };
std::string to_string(TabularFallback f);
TabularFallback parse_tabular_fallback(std::string_view s);

struct TabularConfig {
  Direction direction = Direction::reverse;
  double epsilon_lap = 0.0;
  TabularFallback fallback = TabularFallback::none;
};

// Count-based model over discrete states. Reverse: P(s | s', a); forward:
// P(s' | s, a). Rewards are always keyed on the forward-time source (s, a).
class TabularModel final : public DynamicsModel {
 public:
  using Key = std::pair<State, int>;
  using CountTable = std::map<Key, std::map<State, double>>;

  TabularModel() = default;

  Direction direction() const override { return cfg_.direction; }
  const TabularConfig& config() const { return cfg_; }

  // Predicted-state distribution for (cond, a), sorted by state. nullopt is
  // the no-data signal.
  std::optional<std::vector<std::pair<State, double>>> distribution(const State& cond,
                                                                    const Action& a) const;
  // Mean observed reward of (s, a) in forward time; nullopt if never seen.
  std::optional<double> observed_reward(const State& s, const Action& a) const;
  // Reward attached to a predicted transition (s, a, s'): the observed mean
  // for (s, a), else the mean reward of transitions landing in s', else the
  // global mean.
  double reward_for(const State& s, const Action& a, const State& s_next) const;

  std::optional<Prediction> sample(const State& cond, const Action& a, Rng& rng) const override;
  std::optional<State> mean_state(const State& cond, const Action& a) const override;

  const CountTable& counts() const { return counts_; }
  const std::set<State>& support() const { return support_; }
  bool in_support(const State& s) const { return support_.count(s) > 0; }

  Container to_container() const;
  static TabularModel from_container(const Container& c);

  friend TabularModel fit_tabular(const data::TransitionBuffer& train, const TabularConfig& cfg);

 private:
  void finalize();
  const std::vector<std::pair<State, double>>* displacement_pool(int action) const;

  TabularConfig cfg_;
  CountTable counts_;
  std::map<Key, std::pair<double, double>> reward_acc_;   // (s, a) -> (sum, count)
  std::map<State, std::pair<double, double>> landing_acc_;  // s' -> (sum, count)
  double reward_sum_ = 0.0, reward_count_ = 0.0;
  std::set<State> support_;
  // Derived: per action, displacement (predicted - cond) histogram.
  std::map<int, std::vector<std::pair<State, double>>> displacements_;
};

TabularModel fit_tabular(const data::TransitionBuffer& train, const TabularConfig& cfg);
inline TabularModel fit_tabular_reverse(const data::TransitionBuffer& train, double epsilon_lap) {
  return fit_tabular(train, {Direction::reverse, epsilon_lap, TabularFallback::none});
}

// Swaps s and s_next of every transition (episode structure is dropped).
data::TransitionBuffer time_reversed(const data::TransitionBuffer& buf);

void save_tabular(const std::string& path, const TabularModel& m);
TabularModel load_tabular(const std::string& path);

}  // namespace romilab::dyn
