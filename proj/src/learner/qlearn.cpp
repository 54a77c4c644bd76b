#include "romilab/learner/qlearn.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "romilab/core/container.h"
#include "romilab/core/error.h"

namespace romilab::learn {

std::string to_string(Algo a) { return a == Algo::bcq_discrete ? "bcq_discrete" : "cql_discrete"; }

Algo parse_algo(std::string_view s) {
  if (s == "bcq_discrete" || s == "bcq") return Algo::bcq_discrete;
  if (s == "cql_discrete" || s == "cql") return Algo::cql_discrete;
  throw ConfigError("unknown learner algo '" + std::string(s) + "'");
}

namespace {
constexpr std::int64_t kOffset = 1 << 20;
constexpr std::int64_t kStride = 1 << 21;
}  // namespace

std::int64_t StateKeyer::key(const State& s) const {
  std::int64_t a = 0, b = 0;
  if (kind == Kind::identity) {
    a = s.row();
    b = s.col();
  } else {
    a = static_cast<std::int64_t>(std::floor(s.x() / tile));
    b = static_cast<std::int64_t>(std::floor(s.y() / tile));
  }
  return (a + kOffset) * kStride + (b + kOffset);
}

std::string StateKeyer::key_string(std::int64_t k) const {
  const std::int64_t a = k / kStride - kOffset, b = k % kStride - kOffset;
  return std::to_string(a) + "," + std::to_string(b);
}

std::int64_t StateKeyer::parse_key(const std::string& s) const {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw IoError("bad state key '" + s + "'");
  return (std::stoll(s.substr(0, comma)) + kOffset) * kStride + (std::stoll(s.substr(comma + 1)) + kOffset);
}

StateKeyer StateKeyer::for_spec(const env::MazeSpec& spec, double tile) {
  StateKeyer k;
  k.kind = spec.space == env::SpaceKind::grid ? Kind::identity : Kind::tile;
  k.tile = tile;
  if (!(tile > 0)) throw ConfigError("tile size must be > 0");
  return k;
}

int ActionCoder::encode(const Action& a) const {
  if (grid) {
    if (a.index < 0 || a.index >= kGridActions) throw PreconditionError("grid action index out of range");
    return a.index;
  }
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    const Action d = decode(k);
    const double dot = a.u[0] * d.u[0] + a.u[1] * d.u[1];
    if (dot > best_dot) {
      best_dot = dot;
      best = k;
    }
  }
  return best;
}

Action ActionCoder::decode(int index) const {
  if (grid) return Action::discrete(index);
  const double ang = index * std::numbers::pi / 4.0;
  return Action::force(std::cos(ang), std::sin(ang));
}

ActionCoder ActionCoder::for_spec(const env::MazeSpec& spec) {
  return ActionCoder{spec.space == env::SpaceKind::grid};
}

nlohmann::json LearnerConfig::to_json() const {
  return {{"algo", to_string(algo)},     {"bcq_threshold", bcq_threshold},
          {"cql_alpha", cql_alpha},      {"gamma", gamma},
          {"lr", lr},                    {"batch_size", batch_size},
          {"steps", steps},              {"unseen_value", resolved_unseen_value()},
          {"init_value", init_value},    {"tile", tile}};
}

QTable::QTable(StateKeyer keyer, ActionCoder coder, double gamma, double unseen_value, double init_value)
    : keyer_(keyer), coder_(coder), gamma_(gamma), unseen_(unseen_value), init_(init_value) {}

double QTable::q(std::int64_t key, int a) const {
  if (!pinned_.empty()) {
    const auto p = pinned_.find(key);
    if (p != pinned_.end()) return p->second;
  }
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second[static_cast<std::size_t>(a)];
  return has_data(key) ? init_ : unseen_;
}

std::vector<double> QTable::row(const State& s) const {
  const auto k = keyer_.key(s);
  std::vector<double> out(static_cast<std::size_t>(n_actions()));
  for (int a = 0; a < n_actions(); ++a) out[static_cast<std::size_t>(a)] = q(k, a);
  return out;
}

std::vector<double>& QTable::mutable_row(std::int64_t key) {
  auto it = values_.find(key);
  if (it == values_.end())
    it = values_.emplace(key, std::vector<double>(static_cast<std::size_t>(n_actions()), init_)).first;
  return it->second;
}

double QTable::count(std::int64_t key, int a) const {
  const auto it = counts_.find(key);
  return it == counts_.end() ? 0.0 : it->second[static_cast<std::size_t>(a)];
}

void QTable::add_count(std::int64_t key, int a, double c) {
  auto it = counts_.find(key);
  if (it == counts_.end())
    it = counts_.emplace(key, std::vector<double>(static_cast<std::size_t>(n_actions()), 0.0)).first;
  it->second[static_cast<std::size_t>(a)] += c;
}

const std::vector<double>* QTable::counts_row(std::int64_t key) const {
  const auto it = counts_.find(key);
  return it == counts_.end() ? nullptr : &it->second;
}

std::vector<int> QTable::admissible(std::int64_t key, double threshold) const {
  std::vector<int> out;
  const auto* c = counts_row(key);
  if (!c) return out;
  const double mx = *std::max_element(c->begin(), c->end());
  if (!(mx > 0)) return out;
  for (int a = 0; a < n_actions(); ++a)
    if ((*c)[static_cast<std::size_t>(a)] > 0 && (*c)[static_cast<std::size_t>(a)] / mx >= threshold)
      out.push_back(a);
  return out;
}

void QTable::transform(const std::function<double(double)>& f) {
  for (auto& [_, row] : values_)
    for (auto& v : row) v = f(v);
  unseen_ = f(unseen_);
  init_ = f(init_);
}

nlohmann::json QTable::to_json() const {
  // Sorted keys keep the checkpoint byte-stable.
  std::vector<std::int64_t> keys;
  for (const auto& [k, _] : values_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  nlohmann::json values = nlohmann::json::object(), counts = nlohmann::json::object();
  for (auto k : keys)
    for (int a = 0; a < n_actions(); ++a)
      values[keyer_.key_string(k) + "|" + std::to_string(a)] = values_.at(k)[static_cast<std::size_t>(a)];
  keys.clear();
  for (const auto& [k, _] : counts_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (auto k : keys)
    for (int a = 0; a < n_actions(); ++a) {
      const double c = counts_.at(k)[static_cast<std::size_t>(a)];
      if (c > 0) counts[keyer_.key_string(k) + "|" + std::to_string(a)] = c;
    }
  nlohmann::json pinned = nlohmann::json::object();
  for (const auto& [k, v] : pinned_) pinned[keyer_.key_string(k)] = v;
  return {{"kind", "qtable"},
          {"version", 1},
          {"gamma", gamma_},
          {"unseen_value", unseen_},
          {"init_value", init_},
          {"keyer", {{"kind", keyer_.kind == StateKeyer::Kind::identity ? "identity" : "tile"}, {"tile", keyer_.tile}}},
          {"actions", {{"grid", coder_.grid}, {"count", n_actions()}}},
          {"values", values},
          {"counts", counts},
          {"pinned", pinned}};
}

QTable QTable::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "qtable") throw IoError("not a qtable checkpoint");
  StateKeyer keyer;
  keyer.kind = j.at("keyer").at("kind") == "identity" ? StateKeyer::Kind::identity : StateKeyer::Kind::tile;
  keyer.tile = j.at("keyer").at("tile");
  ActionCoder coder{j.at("actions").at("grid").get<bool>()};
  QTable q(keyer, coder, j.at("gamma"), j.at("unseen_value"), j.at("init_value"));
  const auto split = [&](const std::string& k) {
    const auto bar = k.rfind('|');
    if (bar == std::string::npos) throw IoError("bad qtable key '" + k + "'");
    return std::make_pair(keyer.parse_key(k.substr(0, bar)), std::stoi(k.substr(bar + 1)));
  };
  for (const auto& [k, v] : j.at("values").items()) {
    const auto [sk, a] = split(k);
    q.mutable_row(sk)[static_cast<std::size_t>(a)] = v.get<double>();
  }
  if (j.contains("pinned"))
    for (const auto& [k, v] : j.at("pinned").items()) q.pin(keyer.parse_key(k), v.get<double>());
  for (const auto& [k, v] : j.at("counts").items()) {
    const auto [sk, a] = split(k);
    q.add_count(sk, a, v.get<double>());
  }
  return q;
}

QTable train_policy(data::MixedSampler& sampler, const LearnerConfig& cfg, const env::MazeSpec& spec,
                    TrainStats* stats, const std::vector<std::pair<State, double>>& pinned) {
  if (!(cfg.gamma > 0 && cfg.gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
  if (cfg.batch_size < 1 || cfg.steps < 0) throw ConfigError("invalid learner batch size or steps");
  if (!(cfg.lr > 0)) throw ConfigError("learner lr must be > 0");
  if (cfg.bcq_threshold < 0 || cfg.bcq_threshold > 1) throw ConfigError("bcq_threshold must lie in [0, 1]");
  if (cfg.cql_alpha < 0) throw ConfigError("cql_alpha must be >= 0");

  QTable q(StateKeyer::for_spec(spec, cfg.tile), ActionCoder::for_spec(spec), cfg.gamma,
           cfg.resolved_unseen_value(), cfg.init_value);
  const auto add_counts = [&](const data::TransitionBuffer& b) {
    for (const auto& t : b.transitions) q.add_count(q.keyer().key(t.s), q.coder().encode(t.a));
  };
  for (const auto& [s, v] : pinned) q.pin(q.keyer().key(s), v);
  add_counts(sampler.env_buffer());
  if (sampler.eta() > 0) add_counts(sampler.model_buffer());

  const int na = q.n_actions();
  const bool bcq = cfg.algo == Algo::bcq_discrete;
  std::vector<double> probs(static_cast<std::size_t>(na));
  TrainStats st;
  double td_acc = 0;
  long td_n = 0;
  for (long step = 0; step < cfg.steps; ++step) {
    const auto batch = sampler.sample(static_cast<std::size_t>(cfg.batch_size));
    for (const auto& t : batch) {
      const auto k = q.keyer().key(t.s);
      const auto k2 = q.keyer().key(t.s_next);
      const int a = q.coder().encode(t.a);
      if (q.is_pinned(k)) continue;
      double boot = 0.0;
      if (!t.done) {
        if (q.is_pinned(k2)) {
          boot = q.q(k2, 0);
        } else if (!q.has_data(k2)) {
          boot = q.unseen_value();
        } else if (bcq) {
          auto adm = q.admissible(k2, cfg.bcq_threshold);
          if (adm.empty()) {
            const auto* c = q.counts_row(k2);
            adm.push_back(static_cast<int>(std::max_element(c->begin(), c->end()) - c->begin()));
            ++st.bcq_fallbacks;
          }
          boot = -std::numeric_limits<double>::infinity();
          for (int b : adm) boot = std::max(boot, q.q(k2, b));
        } else {
          boot = -std::numeric_limits<double>::infinity();
          for (int b = 0; b < na; ++b) boot = std::max(boot, q.q(k2, b));
        }
      }
      auto& row = q.mutable_row(k);
      if (!bcq && cfg.cql_alpha > 0) {
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0;
        for (int b = 0; b < na; ++b) z += probs[static_cast<std::size_t>(b)] = std::exp(row[static_cast<std::size_t>(b)] - mx);
        for (auto& p : probs) p /= z;
      }
      const double td = t.r + cfg.gamma * boot - row[static_cast<std::size_t>(a)];
      row[static_cast<std::size_t>(a)] += cfg.lr * td;
      if (!bcq && cfg.cql_alpha > 0) {
        // Gradient of alpha * (logsumexp_b Q(s, b) - Q(s, a)).
        for (int b = 0; b < na; ++b)
          row[static_cast<std::size_t>(b)] -=
              cfg.lr * cfg.cql_alpha * (probs[static_cast<std::size_t>(b)] - (b == a ? 1.0 : 0.0));
      }
      if (step + 1 > cfg.steps - 1000) {
        td_acc += std::abs(td);
        ++td_n;
      }
      ++st.updates;
    }
    ++st.steps;
  }
  for (const auto& [_, row] : q.values())
    for (double v : row)
      if (!std::isfinite(v)) throw TrainingDivergedError("Q-learning produced a non-finite value");
  st.final_mean_abs_td = td_n ? td_acc / static_cast<double>(td_n) : 0.0;
  if (stats) *stats = st;
  return q;
}

QTable train_policy(const data::TransitionBuffer& env_buffer, const data::TransitionBuffer& model_buffer,
                    double eta, const LearnerConfig& cfg, const env::MazeSpec& spec, Rng& rng,
                    TrainStats* stats) {
  data::MixedSampler sampler(env_buffer, model_buffer, eta, Rng(rng()));
  return train_policy(sampler, cfg, spec, stats);
}

std::vector<int> execution_filter(const QTable& q, const State& s, const LearnerConfig& cfg) {
  const auto k = q.keyer().key(s);
  std::vector<int> all(static_cast<std::size_t>(q.n_actions()));
  for (int a = 0; a < q.n_actions(); ++a) all[static_cast<std::size_t>(a)] = a;
  if (cfg.algo != Algo::bcq_discrete || !q.has_data(k)) return all;
  auto adm = q.admissible(k, cfg.bcq_threshold);
  if (adm.empty()) {
    const auto* c = q.counts_row(k);
    adm.push_back(static_cast<int>(std::max_element(c->begin(), c->end()) - c->begin()));
  }
  return adm;
}

int greedy_index(const QTable& q, const State& s, const std::vector<int>& admissible) {
  const auto k = q.keyer().key(s);
  int best = -1;
  double best_v = -std::numeric_limits<double>::infinity();
  const auto consider = [&](int a) {
    const double v = q.q(k, a);
    if (best < 0 || v > best_v) {
      best = a;
      best_v = v;
    }
  };
  if (admissible.empty()) {
    for (int a = 0; a < q.n_actions(); ++a) consider(a);
  } else {
    std::vector<int> sorted = admissible;
    std::sort(sorted.begin(), sorted.end());
    for (int a : sorted) consider(a);
  }
  return best;
}

Action greedy_action(const QTable& q, const State& s, const std::vector<int>& admissible) {
  return q.coder().decode(greedy_index(q, s, admissible));
}

Action greedy_action(const QTable& q, const State& s, const LearnerConfig& cfg) {
  return greedy_action(q, s, execution_filter(q, s, cfg));
}

void save_qtable(const std::string& path, const QTable& q) { write_text_file(path, q.to_json().dump(1) + "\n"); }

QTable load_qtable(const std::string& path) {
  try {
    return QTable::from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace romilab::learn
