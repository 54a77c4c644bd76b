#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "romilab/dataset/buffer.h"
#include "romilab/env/maze.h"

namespace romilab::learn {

enum class Algo { bcq_discrete, cql_discrete };
std::string to_string(Algo a);
Algo parse_algo(std::string_view s);

// Maps states to integer keys: identity on grid cells, or position tiles of
// side `tile` (velocity ignored) for point mazes.
struct StateKeyer {
  enum class Kind { identity, tile };
  Kind kind = Kind::identity;
  double tile = 0.25;

  std::int64_t key(const State& s) const;
  std::string key_string(std::int64_t k) const;
  std::int64_t parse_key(const std::string& s) const;
  static StateKeyer for_spec(const env::MazeSpec& spec, double tile = 0.25);
};

// Discrete action set used by the learner. Grid: the 4 moves. Point: 8
// unit-magnitude force directions at 45 degree spacing starting along +x;
// continuous dataset actions map to the direction with the largest dot
// product.
struct ActionCoder {
  bool grid = true;

  int count() const { return grid ? kGridActions : 8; }
  int encode(const Action& a) const;
  Action decode(int index) const;
  static ActionCoder for_spec(const env::MazeSpec& spec);
};

struct LearnerConfig {
  Algo algo = Algo::bcq_discrete;
  double bcq_threshold = 0.3;
  double cql_alpha = 1.0;
  double gamma = 0.99;
  double lr = 0.1;
  int batch_size = 32;
  long steps = 200000;
  // Value of states without any training data, the tabular stand-in for
  // function-approximation overestimation out of support. Negative means
  // 1 / (1 - gamma).
  double unseen_value = -1.0;
  double init_value = 0.0;  // initial Q of state-action pairs with data
  double tile = 0.25;

  double resolved_unseen_value() const { return unseen_value < 0 ? 1.0 / (1.0 - gamma) : unseen_value; }
  nlohmann::json to_json() const;
};

class QTable {
 public:
  QTable() = default;
  QTable(StateKeyer keyer, ActionCoder coder, double gamma, double unseen_value, double init_value);

  int n_actions() const { return coder_.count(); }
  const StateKeyer& keyer() const { return keyer_; }
  const ActionCoder& coder() const { return coder_; }
  double gamma() const { return gamma_; }
  double unseen_value() const { return unseen_; }

  bool has_data(std::int64_t key) const { return counts_.count(key) > 0; }
  bool has_data(const State& s) const { return has_data(keyer_.key(s)); }
  // Q(s, a); states without data read unseen_value.
  double q(std::int64_t key, int a) const;
  double q(const State& s, int a) const { return q(keyer_.key(s), a); }
  std::vector<double> row(const State& s) const;
  std::vector<double>& mutable_row(std::int64_t key);

  // N(s, a) in the training data.
  double count(std::int64_t key, int a) const;
  void add_count(std::int64_t key, int a, double c = 1.0);
  const std::vector<double>* counts_row(std::int64_t key) const;

  // Actions with N(s, a) / max_b N(s, b) >= threshold. Empty when the state
  // has no data.
  std::vector<int> admissible(std::int64_t key, double threshold) const;

  const std::unordered_map<std::int64_t, std::vector<double>>& values() const { return values_; }
  const std::unordered_map<std::int64_t, std::vector<double>>& counts() const { return counts_; }

  // Pinned states read `value` for every action and are never updated.
  void pin(std::int64_t key, double value) { pinned_[key] = value; }
  bool is_pinned(std::int64_t key) const { return pinned_.count(key) > 0; }

  // Applies f(Q) to every stored value (used by invariance checks).
  void transform(const std::function<double(double)>& f);

  nlohmann::json to_json() const;
  static QTable from_json(const nlohmann::json& j);

 private:
  StateKeyer keyer_;
  ActionCoder coder_;
  double gamma_ = 0.99;
  double unseen_ = 0.0;
  double init_ = 0.0;
  std::unordered_map<std::int64_t, std::vector<double>> values_;
  std::unordered_map<std::int64_t, std::vector<double>> counts_;
  std::unordered_map<std::int64_t, double> pinned_;
};

struct TrainStats {
  long steps = 0;
  long updates = 0;
  long bcq_fallbacks = 0;  // bootstraps at states with data but no admissible action
  double final_mean_abs_td = 0.0;
};

// Q-learning over eta-mixed batches from the sampler. Counts for BCQ
// admissibility come from D_total: the env buffer plus, when eta > 0, the
// model buffer. Terminal transitions bootstrap zero.
QTable train_policy(data::MixedSampler& sampler, const LearnerConfig& cfg, const env::MazeSpec& spec,
                    TrainStats* stats = nullptr,
                    const std::vector<std::pair<State, double>>& pinned = {});
QTable train_policy(const data::TransitionBuffer& env_buffer, const data::TransitionBuffer& model_buffer,
                    double eta, const LearnerConfig& cfg, const env::MazeSpec& spec, Rng& rng,
                    TrainStats* stats = nullptr);

// Actions admissible for execution: the BCQ filter for bcq_discrete, all
// actions for cql_discrete. States with data but an empty filter fall back
// to their most frequent action; states without data allow all actions.
std::vector<int> execution_filter(const QTable& q, const State& s, const LearnerConfig& cfg);

// Arg-max over `admissible` (all actions when empty); ties go to the lowest
// index.
int greedy_index(const QTable& q, const State& s, const std::vector<int>& admissible);
Action greedy_action(const QTable& q, const State& s, const std::vector<int>& admissible);
Action greedy_action(const QTable& q, const State& s, const LearnerConfig& cfg);

void save_qtable(const std::string& path, const QTable& q);
QTable load_qtable(const std::string& path);

}  // namespace romilab::learn
