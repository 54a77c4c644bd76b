#include "romilab/dynamics/ensemble.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "romilab/core/error.h"

namespace romilab::dyn {

using approx::Mat;
using approx::Vec;

namespace {

Vec column_mean(const Mat& x) { return x.rowwise().mean(); }

Vec column_std(const Mat& x, const Vec& mean) {
  Vec s = ((x.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
  return s.cwiseMax(data::kStdFloor);
}

Mat normalize(const Mat& x, const Vec& mean, const Vec& stdev) {
  return (x.colwise() - mean).array().colwise() / stdev.array();
}

struct Encoded {
  Mat inputs;   // (sd + 2) x N, raw
  Mat targets;  // (sd + 1) x N, raw
};

Encoded encode(const data::TransitionBuffer& buf, Direction dir, std::size_t sd) {
  const auto n = static_cast<Eigen::Index>(buf.size());
  Encoded e{Mat(static_cast<Eigen::Index>(sd + data::kActionFeatureDim), n),
            Mat(static_cast<Eigen::Index>(sd + 1), n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = buf[static_cast<std::size_t>(j)];
    const State& cond = dir == Direction::reverse ? t.s_next : t.s;
    const State& other = dir == Direction::reverse ? t.s : t.s_next;
    for (std::size_t i = 0; i < sd; ++i) {
      e.inputs(static_cast<Eigen::Index>(i), j) = cond.v[i];
      e.targets(static_cast<Eigen::Index>(i), j) = other.v[i] - cond.v[i];
    }
    e.inputs(static_cast<Eigen::Index>(sd), j) = t.a.u[0];
    e.inputs(static_cast<Eigen::Index>(sd + 1), j) = t.a.u[1];
    e.targets(static_cast<Eigen::Index>(sd), j) = t.r;
  }
  return e;
}

Mat gather_cols(const Mat& x, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
  Mat out(x.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) out.col(static_cast<Eigen::Index>(k - begin)) = x.col(idx[k]);
  return out;
}

}  // namespace

std::vector<int> GaussianEnsemble::select_elites(const std::vector<double>& nll, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > nll.size())
    throw ConfigError("elite count must lie in [1, members]");
  std::vector<int> idx(nll.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return nll[a] < nll[b]; });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

Mat GaussianEnsemble::encode_inputs(const std::vector<State>& cond,
                                    const std::vector<Action>& actions) const {
  const auto n = static_cast<Eigen::Index>(cond.size());
  Mat x(static_cast<Eigen::Index>(state_dim_ + data::kActionFeatureDim), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& s = cond[static_cast<std::size_t>(j)];
    if (s.dim != state_dim_) throw DimensionError("ensemble query state has the wrong dimension");
    for (std::size_t i = 0; i < state_dim_; ++i) x(static_cast<Eigen::Index>(i), j) = s.v[i];
    x(static_cast<Eigen::Index>(state_dim_), j) = actions[static_cast<std::size_t>(j)].u[0];
    x(static_cast<Eigen::Index>(state_dim_ + 1), j) = actions[static_cast<std::size_t>(j)].u[1];
  }
  return normalize(x, in_mean_, in_std_);
}

approx::GaussianHead GaussianEnsemble::member_head(std::size_t member, const std::vector<State>& cond,
                                                   const std::vector<Action>& actions) const {
  return approx::make_head(members_.at(member).forward(encode_inputs(cond, actions)), cfg_.log_sigma);
}

State GaussianEnsemble::decode_state(const State& cond, const Vec& z) const {
  State s = cond;
  for (std::size_t i = 0; i < state_dim_; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s.v[i] = cond.v[i] + z[k] * out_std_[k] + out_mean_[k];
    if (cfg_.round_to_grid) s.v[i] = std::round(s.v[i]);
  }
  return s;
}

double GaussianEnsemble::decode_reward(const Vec& z) const {
  const auto k = static_cast<Eigen::Index>(state_dim_);
  return z[k] * out_std_[k] + out_mean_[k];
}

std::optional<Prediction> GaussianEnsemble::sample(const State& cond, const Action& a, Rng& rng) const {
  const int e = elites_[uniform_index(rng, elites_.size())];
  const auto head = member_head(static_cast<std::size_t>(e), {cond}, {a});
  const Vec z = approx::reparam_sample(head, rng).col(0);
  return Prediction{decode_state(cond, z), decode_reward(z)};
}

std::optional<State> GaussianEnsemble::mean_state(const State& cond, const Action& a) const {
  Vec mu = Vec::Zero(static_cast<Eigen::Index>(state_dim_ + 1));
  for (int e : elites_) mu += member_head(static_cast<std::size_t>(e), {cond}, {a}).mu.col(0);
  mu /= static_cast<double>(elites_.size());
  return decode_state(cond, mu);
}

GaussianEnsemble fit_gaussian_ensemble(const data::TransitionBuffer& train,
                                       const data::TransitionBuffer& holdout,
                                       const EnsembleConfig& cfg, Rng& rng) {
  if (holdout.empty()) throw PreconditionError("ensemble fitting needs a non-empty holdout");
  if (train.empty()) throw PreconditionError("ensemble fitting needs a non-empty train buffer");
  if (cfg.n_members < 1 || cfg.n_elites < 1 || cfg.n_elites > cfg.n_members)
    throw ConfigError("need 1 <= n_elites <= n_members");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
    throw ConfigError("batch_size, max_epochs and patience must be >= 1");

  GaussianEnsemble m;
  m.cfg_ = cfg;
  m.state_dim_ = train[0].s.dim;
  const std::size_t sd = m.state_dim_;
  const Encoded tr = encode(train, cfg.direction, sd);
  const Encoded ho = encode(holdout, cfg.direction, sd);
  m.in_mean_ = column_mean(tr.inputs);
  m.in_std_ = column_std(tr.inputs, m.in_mean_);
  m.out_mean_ = column_mean(tr.targets);
  m.out_std_ = column_std(tr.targets, m.out_mean_);
  const Mat x = normalize(tr.inputs, m.in_mean_, m.in_std_);
  const Mat y = normalize(tr.targets, m.out_mean_, m.out_std_);
  const Mat xh = normalize(ho.inputs, m.in_mean_, m.in_std_);
  const Mat yh = normalize(ho.targets, m.out_mean_, m.out_std_);

  std::vector<int> dims{static_cast<int>(x.rows())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(2 * static_cast<int>(y.rows()));
  std::vector<approx::Activation> acts(cfg.hidden.size(), cfg.activation);
  acts.push_back(approx::Activation::linear);

  const std::uint64_t root = rng();
  const std::size_t n = train.size();
  const std::size_t per_epoch =
      cfg.max_steps_per_epoch > 0
          ? std::min(n, static_cast<std::size_t>(cfg.max_steps_per_epoch) * cfg.batch_size)
          : n;
  std::vector<double> best_nll;
  for (int k = 0; k < cfg.n_members; ++k) {
    Rng mrng(derive_seed(root, static_cast<std::uint64_t>(k)));
    approx::Mlp net(dims, acts, mrng);
    approx::AdamState adam(net.param_count(), cfg.adam);
    approx::Tape tape;
    Vec grad;
    Mat d_raw;
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);

    const auto holdout_nll = [&] {
      const auto head = approx::make_head(net.forward(xh), cfg.log_sigma);
      return approx::gaussian_nll(head, yh) / static_cast<double>(yh.cols());
    };
    double best = holdout_nll();
    Vec best_params = net.params();
    int since = 0, epoch = 0;
    while (epoch < cfg.max_epochs && since < cfg.patience) {
      ++epoch;
      std::shuffle(order.begin(), order.end(), mrng);
      for (std::size_t b = 0; b < per_epoch; b += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t e = std::min(per_epoch, b + static_cast<std::size_t>(cfg.batch_size));
        const Mat xb = gather_cols(x, order, b, e);
        const Mat yb = gather_cols(y, order, b, e);
        const auto head = approx::make_head(net.forward(xb, tape), cfg.log_sigma);
        const double loss = approx::gaussian_nll_grad(head, yb, 1.0 / static_cast<double>(e - b), d_raw);
        if (!std::isfinite(loss))
          throw TrainingDivergedError("ensemble member " + std::to_string(k) +
                                      " produced a non-finite loss at epoch " + std::to_string(epoch));
        grad.setZero(static_cast<Eigen::Index>(net.param_count()));
        net.backward(tape, d_raw, grad);
        approx::adam_step(adam, net.params(), grad);
      }
      const double h = holdout_nll();
      if (!std::isfinite(h))
        throw TrainingDivergedError("ensemble member " + std::to_string(k) +
                                    " produced a non-finite holdout loss");
      if (h < best) {
        best = h;
        best_params = net.params();
        since = 0;
      } else {
        ++since;
      }
    }
    net.params() = best_params;
    m.members_.push_back(std::move(net));
    m.reports_.push_back({epoch, best});
    best_nll.push_back(best);
  }
  m.elites_ = GaussianEnsemble::select_elites(best_nll, cfg.n_elites);
  return m;
}

void GaussianEnsemble::save(const std::string& path) const {
  std::vector<const approx::Mlp*> nets;
  for (const auto& n : members_) nets.push_back(&n);
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : reports_) reports.push_back({{"epochs", r.epochs}, {"holdout_nll", r.best_holdout_nll}});
  const nlohmann::json extra = {{"model", "gaussian_ensemble"},
                                {"direction", to_string(cfg_.direction)},
                                {"state_dim", state_dim_},
                                {"elites", elites_},
                                {"log_sigma", {cfg_.log_sigma.lo, cfg_.log_sigma.hi}},
                                {"round_to_grid", cfg_.round_to_grid},
                                {"in_mean", vec(in_mean_)},
                                {"in_std", vec(in_std_)},
                                {"out_mean", vec(out_mean_)},
                                {"out_std", vec(out_std_)},
                                {"members", reports}};
  approx::save_mlps(path, nets, extra);
}

GaussianEnsemble GaussianEnsemble::load(const std::string& path) {
  nlohmann::json extra;
  GaussianEnsemble m;
  m.members_ = approx::load_mlps(path, &extra);
  if (extra.value("model", "") != "gaussian_ensemble")
    throw IoError(path + ": not a gaussian ensemble checkpoint");
  auto vec = [](const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  m.cfg_.direction = parse_direction(extra.at("direction").get<std::string>());
  m.cfg_.n_members = static_cast<int>(m.members_.size());
  m.state_dim_ = extra.at("state_dim").get<std::size_t>();
  m.elites_ = extra.at("elites").get<std::vector<int>>();
  m.cfg_.n_elites = static_cast<int>(m.elites_.size());
  m.cfg_.log_sigma = {extra.at("log_sigma")[0].get<double>(), extra.at("log_sigma")[1].get<double>()};
  m.cfg_.round_to_grid = extra.at("round_to_grid").get<bool>();
  m.in_mean_ = vec(extra.at("in_mean"));
  m.in_std_ = vec(extra.at("in_std"));
  m.out_mean_ = vec(extra.at("out_mean"));
  m.out_std_ = vec(extra.at("out_std"));
  for (const auto& r : extra.at("members"))
    m.reports_.push_back({r.at("epochs").get<int>(), r.at("holdout_nll").get<double>()});
  return m;
}

}  // namespace romilab::dyn
