#include "romilab/dataset/buffer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "romilab/core/error.h"

namespace romilab::data {

void TransitionBuffer::end_episode() {
  const std::size_t last = episode_boundaries.empty() ? 0 : episode_boundaries.back();
  if (size() > last) episode_boundaries.push_back(size());
}

void TransitionBuffer::check_invariants() const {
  std::size_t prev = 0;
  for (std::size_t i = 0; i < episode_boundaries.size(); ++i) {
    const std::size_t b = episode_boundaries[i];
    if ((i > 0 && b <= prev) || b > size() || b == 0)
      throw PreconditionError("episode boundaries must be strictly increasing and <= length");
    prev = b;
  }
  for (const auto& t : transitions) {
    if (!std::isfinite(t.r)) throw PreconditionError("transition reward is not finite");
    if (t.origin == Origin::model && t.collided)
      throw PreconditionError("model transitions cannot carry a collision flag");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> TransitionBuffer::episodes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t b : episode_boundaries) {
    out.emplace_back(begin, b);
    begin = b;
  }
  if (begin < size()) out.emplace_back(begin, size());
  return out;
}

HoldoutSplit split_holdout(const TransitionBuffer& buf, std::size_t n_holdout, Rng& rng) {
  if (n_holdout >= buf.size() && n_holdout > 0)
    throw SizeError("holdout size " + std::to_string(n_holdout) + " must be below buffer size " +
                    std::to_string(buf.size()));
  std::vector<std::size_t> idx(buf.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first n_holdout slots become the holdout.
  for (std::size_t i = 0; i < n_holdout; ++i) {
    const std::size_t j = i + uniform_index(rng, idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::uint8_t> in_holdout(buf.size(), 0);
  for (std::size_t i = 0; i < n_holdout; ++i) in_holdout[idx[i]] = 1;

  HoldoutSplit out;
  for (auto* part : {&out.train, &out.holdout}) {
    part->layout_id = buf.layout_id;
    part->seed = buf.seed;
    part->state_dim = buf.state_dim;
    part->action_dim = buf.action_dim;
  }
  out.train.transitions.reserve(buf.size() - n_holdout);
  out.holdout.transitions.reserve(n_holdout);
  for (std::size_t i = 0; i < buf.size(); ++i)
    (in_holdout[i] ? out.holdout : out.train).transitions.push_back(buf[i]);
  if (n_holdout == 0) out.train.episode_boundaries = buf.episode_boundaries;
  return out;
}

void column_stats(const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                  std::vector<double>& stdev) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  mean.assign(d, 0.0);
  stdev.assign(d, 0.0);
  if (rows.empty()) return;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
  for (auto& m : mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) stdev[k] += (r[k] - mean[k]) * (r[k] - mean[k]);
  for (auto& s : stdev) s = std::max(std::sqrt(s / n), kStdFloor);
}

NormStats compute_norm_stats(const TransitionBuffer& buf) {
  if (buf.size() < 2) throw SizeError("norm stats need at least 2 transitions");
  const std::size_t sd = buf[0].s.dim;
  std::vector<std::vector<double>> states, actions, rewards;
  states.reserve(buf.size());
  actions.reserve(buf.size());
  rewards.reserve(buf.size());
  for (const auto& t : buf.transitions) {
    states.emplace_back(t.s.v.begin(), t.s.v.begin() + sd);
    actions.push_back({t.a.u[0], t.a.u[1]});
    rewards.push_back({t.r});
  }
  NormStats ns;
  column_stats(states, ns.state_mean, ns.state_std);
  column_stats(actions, ns.action_mean, ns.action_std);
  std::vector<double> rm, rs;
  column_stats(rewards, rm, rs);
  ns.reward_mean = rm[0];
  ns.reward_std = rs[0];
  return ns;
}

PriorityMode parse_priority_mode(const std::string& s) {
  if (s == "uniform") return PriorityMode::uniform;
  if (s == "return_weighted") return PriorityMode::return_weighted;
  throw ConfigError("unknown start mode '" + s + "'");
}

std::string to_string(PriorityMode m) {
  return m == PriorityMode::uniform ? "uniform" : "return_weighted";
}

std::vector<double> priority_weights(const TransitionBuffer& buf, PriorityMode mode,
                                     double temperature) {
  if (buf.empty()) throw SizeError("priority weights need a non-empty buffer");
  const double n = static_cast<double>(buf.size());
  std::vector<double> w(buf.size(), 1.0 / n);
  if (mode == PriorityMode::uniform) return w;
  if (buf.episode_boundaries.empty())
    throw PreconditionError("return-weighted priorities need episode boundaries");
  if (!(temperature > 0)) throw ConfigError("priority temperature must be > 0");

  const auto eps = buf.episodes();
  std::vector<double> logits(eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    double ret = 0;
    for (std::size_t i = eps[e].first; i < eps[e].second; ++i) ret += buf[i].r;
    logits[e] = ret / temperature;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  // Each transition carries its episode's exp(return / T); normalizing over
  // transitions gives the broadcast softmax.
  double z = 0;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const double mass = std::exp(logits[e] - mx);
    for (std::size_t i = eps[e].first; i < eps[e].second; ++i) w[i] = mass;
    z += mass * static_cast<double>(eps[e].second - eps[e].first);
  }
  for (auto& x : w) x /= z;
  return w;
}

MixedSampler::MixedSampler(const TransitionBuffer& env_buffer,
                           const TransitionBuffer& model_buffer, double eta, Rng rng)
    : env_(env_buffer), model_(model_buffer), eta_(eta), rng_(std::move(rng)) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
}

std::size_t MixedSampler::model_share(double eta, std::size_t batch_size) {
  return static_cast<std::size_t>(std::llround(eta * static_cast<double>(batch_size)));
}

std::vector<Transition> MixedSampler::sample(std::size_t batch_size) {
  const std::size_t n_model = model_share(eta_, batch_size);
  const std::size_t n_env = batch_size - n_model;
  if (n_model > 0 && model_.empty())
    throw CompositionError("eta > 0 but the model buffer is empty");
  if (n_env > 0 && env_.empty()) throw CompositionError("environment buffer is empty");
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < n_model; ++i)
    batch.push_back(model_[uniform_index(rng_, model_.size())]);
  for (std::size_t i = 0; i < n_env; ++i) batch.push_back(env_[uniform_index(rng_, env_.size())]);
  std::shuffle(batch.begin(), batch.end(), rng_);
  return batch;
}

}  // namespace romilab::data
