#include "romilab/dynamics/tabular.h"

#include "romilab/core/error.h"

namespace romilab::dyn {

std::string to_string(Direction d) { return d == Direction::reverse ? "reverse" : "forward"; }

Direction parse_direction(std::string_view s) {
  if (s == "reverse") return Direction::reverse;
  if (s == "forward") return Direction::forward;
  throw ConfigError("unknown direction '" + std::string(s) + "'");
}

std::string to_string(TabularFallback f) {
  return f == TabularFallback::none ? "none" : "displacement";
}

TabularFallback parse_tabular_fallback(std::string_view s) {
  if (s == "none") return TabularFallback::none;
  if (s == "displacement") return TabularFallback::displacement;
  throw ConfigError("unknown tabular fallback '" + std::string(s) + "'");
}

namespace {

State offset(const State& base, const State& delta, bool add) {
  State out = base;
  for (std::size_t i = 0; i < base.dim; ++i) out.v[i] = add ? base.v[i] + delta.v[i] : base.v[i] - delta.v[i];
  return out;
}

}  // namespace

TabularModel fit_tabular(const data::TransitionBuffer& train, const TabularConfig& cfg) {
  if (train.empty()) throw PreconditionError("cannot fit a tabular model on an empty buffer");
  if (!(cfg.epsilon_lap >= 0.0)) throw ConfigError("epsilon_lap must be >= 0");
  TabularModel m;
  m.cfg_ = cfg;
  const bool rev = cfg.direction == Direction::reverse;
  for (const auto& t : train.transitions) {
    if (!t.a.is_discrete()) throw PreconditionError("tabular models need discrete actions");
    const State& cond = rev ? t.s_next : t.s;
    const State& other = rev ? t.s : t.s_next;
    m.counts_[{cond, t.a.index}][other] += 1.0;
    auto& ra = m.reward_acc_[{t.s, t.a.index}];
    ra.first += t.r;
    ra.second += 1.0;
    auto& la = m.landing_acc_[t.s_next];
    la.first += t.r;
    la.second += 1.0;
    m.reward_sum_ += t.r;
    m.reward_count_ += 1.0;
    m.support_.insert(t.s);
    m.support_.insert(t.s_next);
  }
  m.finalize();
  return m;
}

void TabularModel::finalize() {
  std::map<int, std::map<State, double>> pooled;
  for (const auto& [key, row] : counts_)
    for (const auto& [other, c] : row) pooled[key.second][offset(other, key.first, false)] += c;
  displacements_.clear();
  for (auto& [a, hist] : pooled) displacements_[a].assign(hist.begin(), hist.end());
}

const std::vector<std::pair<State, double>>* TabularModel::displacement_pool(int action) const {
  auto it = displacements_.find(action);
  return it == displacements_.end() ? nullptr : &it->second;
}

std::optional<std::vector<std::pair<State, double>>> TabularModel::distribution(
    const State& cond, const Action& a) const {
  std::vector<std::pair<State, double>> out;
  const auto it = counts_.find({cond, a.index});
  const double eps = cfg_.epsilon_lap;
  const double m = static_cast<double>(support_.size());
  if (it != counts_.end()) {
    double total = 0;
    for (const auto& [_, c] : it->second) total += c;
    if (eps > 0) {
      out.reserve(support_.size());
      for (const State& u : support_) {
        const auto c = it->second.find(u);
        out.emplace_back(u, ((c == it->second.end() ? 0.0 : c->second) + eps) / (total + eps * m));
      }
    } else {
      for (const auto& [u, c] : it->second) out.emplace_back(u, c / total);
    }
    return out;
  }
  if (eps > 0 && m > 0) {
    for (const State& u : support_) out.emplace_back(u, 1.0 / m);
    return out;
  }
  if (cfg_.fallback == TabularFallback::displacement && in_support(cond)) {
    const auto* pool = displacement_pool(a.index);
    if (!pool) return std::nullopt;
    double total = 0;
    for (const auto& [_, c] : *pool) total += c;
    std::map<State, double> shifted;
    for (const auto& [d, c] : *pool) shifted[offset(cond, d, true)] += c / total;
    out.assign(shifted.begin(), shifted.end());
    return out;
  }
  return std::nullopt;
}

std::optional<double> TabularModel::observed_reward(const State& s, const Action& a) const {
  const auto it = reward_acc_.find({s, a.index});
  if (it == reward_acc_.end()) return std::nullopt;
  return it->second.first / it->second.second;
}

double TabularModel::reward_for(const State& s, const Action& a, const State& s_next) const {
  if (auto r = observed_reward(s, a)) return *r;
  const auto it = landing_acc_.find(s_next);
  if (it != landing_acc_.end()) return it->second.first / it->second.second;
  return reward_count_ > 0 ? reward_sum_ / reward_count_ : 0.0;
}

std::optional<Prediction> TabularModel::sample(const State& cond, const Action& a, Rng& rng) const {
  const auto dist = distribution(cond, a);
  if (!dist) return std::nullopt;
  const double u = uniform01(rng);
  double acc = 0;
  const State* pick = &dist->back().first;
  for (const auto& [s, p] : *dist) {
    acc += p;
    if (u < acc) {
      pick = &s;
      break;
    }
  }
  Prediction out;
  out.state = *pick;
  out.reward = cfg_.direction == Direction::reverse ? reward_for(*pick, a, cond)
                                                    : reward_for(cond, a, *pick);
  return out;
}

std::optional<State> TabularModel::mean_state(const State& cond, const Action& a) const {
  const auto dist = distribution(cond, a);
  if (!dist) return std::nullopt;
  State mean = State::of_dim(cond.dim);
  for (const auto& [s, p] : *dist)
    for (std::size_t i = 0; i < cond.dim; ++i) mean.v[i] += p * s.v[i];
  return mean;
}

Container TabularModel::to_container() const {
  const std::size_t sd = support_.empty() ? 0 : support_.begin()->dim;
  Container c;
  c.header = {{"kind", "tabular_model"},
              {"version", 1},
              {"direction", to_string(cfg_.direction)},
              {"epsilon_lap", cfg_.epsilon_lap},
              {"fallback", to_string(cfg_.fallback)},
              {"state_dim", sd},
              {"reward_sum", reward_sum_},
              {"reward_count", reward_count_}};
  auto put = [&](const State& s) {
    for (std::size_t i = 0; i < sd; ++i) c.payload.push_back(static_cast<float>(s.v[i]));
  };
  std::size_t n_counts = 0;
  for (const auto& [key, row] : counts_)
    for (const auto& [other, n] : row) {
      put(key.first);
      c.payload.push_back(static_cast<float>(key.second));
      put(other);
      c.payload.push_back(static_cast<float>(n));
      ++n_counts;
    }
  for (const auto& [key, acc] : reward_acc_) {
    put(key.first);
    c.payload.push_back(static_cast<float>(key.second));
    c.payload.push_back(static_cast<float>(acc.first));
    c.payload.push_back(static_cast<float>(acc.second));
  }
  for (const auto& [s, acc] : landing_acc_) {
    put(s);
    c.payload.push_back(static_cast<float>(acc.first));
    c.payload.push_back(static_cast<float>(acc.second));
  }
  for (const State& s : support_) put(s);
  c.header["records"] = {{"counts", n_counts},
                         {"rewards", reward_acc_.size()},
                         {"landing", landing_acc_.size()},
                         {"support", support_.size()}};
  return c;
}

TabularModel TabularModel::from_container(const Container& c) {
  if (c.header.value("kind", "") != "tabular_model")
    throw IoError("container is not a tabular model");
  TabularModel m;
  m.cfg_.direction = parse_direction(c.header.at("direction").get<std::string>());
  m.cfg_.epsilon_lap = c.header.at("epsilon_lap").get<double>();
  m.cfg_.fallback = parse_tabular_fallback(c.header.at("fallback").get<std::string>());
  m.reward_sum_ = c.header.at("reward_sum").get<double>();
  m.reward_count_ = c.header.at("reward_count").get<double>();
  const std::size_t sd = c.header.at("state_dim").get<std::size_t>();
  const auto& rec = c.header.at("records");
  const std::size_t nc = rec.at("counts"), nr = rec.at("rewards"), nl = rec.at("landing"),
                    ns = rec.at("support");
  if (c.payload.size() != nc * (2 * sd + 2) + nr * (sd + 3) + nl * (sd + 2) + ns * sd)
    throw IoError("tabular model payload size mismatch");
  std::size_t p = 0;
  auto get_state = [&] {
    State s = State::of_dim(sd);
    for (std::size_t i = 0; i < sd; ++i) s.v[i] = c.payload[p++];
    return s;
  };
  for (std::size_t k = 0; k < nc; ++k) {
    const State cond = get_state();
    const int a = static_cast<int>(c.payload[p++]);
    const State other = get_state();
    m.counts_[{cond, a}][other] = c.payload[p++];
  }
  for (std::size_t k = 0; k < nr; ++k) {
    const State s = get_state();
    const int a = static_cast<int>(c.payload[p++]);
    const double sum = c.payload[p++];
    m.reward_acc_[{s, a}] = {sum, c.payload[p++]};
  }
  for (std::size_t k = 0; k < nl; ++k) {
    const State s = get_state();
    const double sum = c.payload[p++];
    m.landing_acc_[s] = {sum, c.payload[p++]};
  }
  for (std::size_t k = 0; k < ns; ++k) m.support_.insert(get_state());
  m.finalize();
  return m;
}

data::TransitionBuffer time_reversed(const data::TransitionBuffer& buf) {
  data::TransitionBuffer out = buf;
  out.episode_boundaries.clear();
  for (auto& t : out.transitions) std::swap(t.s, t.s_next);
  return out;
}

void save_tabular(const std::string& path, const TabularModel& m) {
  write_container(path, m.to_container());
}

TabularModel load_tabular(const std::string& path) {
  return TabularModel::from_container(read_container(path));
}

}  // namespace romilab::dyn
