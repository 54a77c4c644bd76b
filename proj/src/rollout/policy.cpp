#include "romilab/rollout/policy.h"

#include <algorithm>
#include <cmath>

#include "romilab/core/error.h"

namespace romilab::rollout {

using approx::Mat;
using approx::Vec;

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::uniform: return "uniform";
    case PolicyKind::empirical: return "empirical";
    case PolicyKind::cvae: return "cvae";
    case PolicyKind::rbc: return "rbc";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "uniform") return PolicyKind::uniform;
  if (s == "empirical") return PolicyKind::empirical;
  if (s == "cvae") return PolicyKind::cvae;
  if (s == "rbc") return PolicyKind::rbc;
  throw ConfigError("unknown rollout policy '" + std::string(s) + "'");
}

ActionSpace ActionSpace::of(const env::MazeSpec& spec) {
  ActionSpace a;
  a.discrete = spec.space == env::SpaceKind::grid;
  a.n_actions = a.discrete ? kGridActions : 0;
  return a;
}

Action ActionSpace::project(double u0, double u1) const {
  if (!discrete) return Action::force(std::clamp(u0, lo, hi), std::clamp(u1, lo, hi));
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_actions; ++k) {
    const double d = u0 * kGridMoves[k][0] + u1 * kGridMoves[k][1];
    if (d > best_dot) {
      best_dot = d;
      best = k;
    }
  }
  return Action::discrete(best);
}

std::optional<Action> UniformPolicy::sample(const State&, Rng& rng) const {
  if (space_.discrete)
    return Action::discrete(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(space_.n_actions))));
  const double u0 = space_.lo + (space_.hi - space_.lo) * uniform01(rng);
  const double u1 = space_.lo + (space_.hi - space_.lo) * uniform01(rng);
  return Action::force(u0, u1);
}

namespace {

const State& cond_of(const data::Transition& t, dyn::Direction d) {
  return d == dyn::Direction::reverse ? t.s_next : t.s;
}

Mat normalize_cols(const Mat& x, const Vec& mean, const Vec& stdev) {
  return (x.colwise() - mean).array().colwise() / stdev.array();
}

void column_moments(const Mat& x, Vec& mean, Vec& stdev) {
  mean = x.rowwise().mean();
  stdev = ((x.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
  stdev = stdev.cwiseMax(data::kStdFloor);
}

Mat state_col(const State& s) {
  Mat x(static_cast<Eigen::Index>(s.dim), 1);
  for (std::size_t i = 0; i < s.dim; ++i) x(static_cast<Eigen::Index>(i), 0) = s.v[i];
  return x;
}

std::vector<Eigen::Index> draw_batch(std::size_t n, int batch, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = static_cast<Eigen::Index>(uniform_index(rng, n));
  return idx;
}

Mat gather(const Mat& x, const std::vector<Eigen::Index>& idx) {
  Mat out(x.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(idx[k]);
  return out;
}

std::vector<double> to_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }
Vec from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json space_json(const ActionSpace& s) {
  return {{"discrete", s.discrete}, {"n_actions", s.n_actions}, {"lo", s.lo}, {"hi", s.hi}};
}
ActionSpace space_from(const nlohmann::json& j) {
  ActionSpace s;
  s.discrete = j.at("discrete");
  s.n_actions = j.at("n_actions");
  s.lo = j.at("lo");
  s.hi = j.at("hi");
  return s;
}

constexpr int kTraceEvery = 100;

}  // namespace

Mat conditioning_matrix(const data::TransitionBuffer& buf, dyn::Direction direction) {
  if (buf.empty()) throw PreconditionError("empty buffer");
  const std::size_t sd = buf[0].s.dim;
  Mat x(static_cast<Eigen::Index>(sd), static_cast<Eigen::Index>(buf.size()));
  for (std::size_t j = 0; j < buf.size(); ++j) {
    const State& c = cond_of(buf[j], direction);
    for (std::size_t i = 0; i < sd; ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.v[i];
  }
  return x;
}

Mat action_matrix(const data::TransitionBuffer& buf) {
  Mat a(static_cast<Eigen::Index>(data::kActionFeatureDim), static_cast<Eigen::Index>(buf.size()));
  for (std::size_t j = 0; j < buf.size(); ++j) {
    a(0, static_cast<Eigen::Index>(j)) = buf[j].a.u[0];
    a(1, static_cast<Eigen::Index>(j)) = buf[j].a.u[1];
  }
  return a;
}

EmpiricalPolicy::EmpiricalPolicy(const data::TransitionBuffer& buf, dyn::Direction direction,
                                 bool discrete_states, std::size_t k)
    : discrete_(discrete_states), k_(k) {
  if (buf.empty()) throw PreconditionError("empirical policy needs a non-empty buffer");
  if (discrete_) {
    for (const auto& t : buf.transitions) exact_[cond_of(t, direction)].push_back(t.a);
    return;
  }
  const std::size_t sd = buf[0].s.dim;
  std::vector<double> flat;
  flat.reserve(buf.size() * sd);
  for (const auto& t : buf.transitions) {
    const State& c = cond_of(t, direction);
    flat.insert(flat.end(), c.v.begin(), c.v.begin() + static_cast<std::ptrdiff_t>(sd));
    actions_.push_back(t.a);
  }
  index_ = SpatialIndex(std::move(flat), sd, 0.25);
}

std::optional<Action> EmpiricalPolicy::sample(const State& cond, Rng& rng) const {
  if (discrete_) {
    const auto it = exact_.find(cond);
    if (it == exact_.end()) return std::nullopt;
    return it->second[uniform_index(rng, it->second.size())];
  }
  const auto nn = index_.knn(cond.v.data(), k_);
  if (nn.empty()) return std::nullopt;
  return actions_[nn[uniform_index(rng, nn.size())]];
}

CvaeLoss cvae_loss(const CvaeNets& nets, const Mat& cond, const Mat& actions, const Mat& eps,
                   approx::LogSigmaBounds bounds, double scale, Vec* g_enc, Vec* g_dec) {
  const Eigen::Index sd = cond.rows(), b = cond.cols(), dz = nets.latent_dim;
  if (actions.cols() != b || eps.cols() != b || eps.rows() != dz)
    throw DimensionError("cvae_loss batch shapes disagree");
  Mat enc_in(sd + actions.rows(), b);
  enc_in << cond, actions;
  approx::Tape te, td;
  const auto head = approx::make_head(nets.encoder.forward(enc_in, te), bounds);
  const Mat z = approx::reparam_with(head, eps);
  Mat dec_in(sd + dz, b);
  dec_in << cond, z;
  const Mat a_hat = nets.decoder.forward(dec_in, td);
  CvaeLoss out;
  out.reconstruction = (actions - a_hat).squaredNorm();
  out.kl = approx::kl_standard_normal(head);
  if (g_enc || g_dec) {
    Mat d_kl;
    approx::kl_standard_normal(head, &d_kl, scale);
    Vec scratch;
    Vec& gd = g_dec ? *g_dec : scratch;
    const Mat d_dec_in = nets.decoder.backward(td, scale * 2.0 * (a_hat - actions), gd);
    const Mat d_enc_raw = approx::reparam_backward(head, eps, d_dec_in.bottomRows(dz)) + d_kl;
    Vec scratch2;
    nets.encoder.backward(te, d_enc_raw, g_enc ? *g_enc : scratch2);
  }
  return out;
}

CvaePolicy CvaePolicy::from_nets(CvaeNets nets, ActionSpace space, std::size_t state_dim, double z_clip) {
  CvaePolicy p;
  p.nets_ = std::move(nets);
  p.space_ = space;
  p.z_clip_ = z_clip;
  p.cond_mean_ = Vec::Zero(static_cast<Eigen::Index>(state_dim));
  p.cond_std_ = Vec::Ones(static_cast<Eigen::Index>(state_dim));
  return p;
}

std::optional<Action> CvaePolicy::sample(const State& cond, Rng& rng) const {
  Mat z(nets_.latent_dim, 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    z(i, 0) = std::clamp(standard_normal(rng), -z_clip_, z_clip_);
  Mat in(static_cast<Eigen::Index>(cond.dim) + z.rows(), 1);
  in << normalize_cols(state_col(cond), cond_mean_, cond_std_), z;
  const Mat a = nets_.decoder.forward(in);
  return space_.project(a(0, 0), a(1, 0));
}

CvaePolicy train_cvae_policy(const data::TransitionBuffer& train, dyn::Direction direction,
                             ActionSpace space, const CvaeConfig& cfg, Rng& rng) {
  if (train.empty()) throw PreconditionError("CVAE training needs a non-empty buffer");
  if (cfg.batch_size < 1 || cfg.steps < 0) throw ConfigError("invalid CVAE batch size or steps");
  CvaePolicy p;
  p.space_ = space;
  p.z_clip_ = cfg.z_clip;
  const Mat raw = conditioning_matrix(train, direction);
  column_moments(raw, p.cond_mean_, p.cond_std_);
  const Mat cond = normalize_cols(raw, p.cond_mean_, p.cond_std_);
  const Mat acts = action_matrix(train);
  const int sd = static_cast<int>(cond.rows());
  const int ad = static_cast<int>(acts.rows());
  const int dz = cfg.latent_dim > 0 ? cfg.latent_dim : 2 * ad;
  p.nets_.latent_dim = dz;

  std::vector<int> enc_dims{sd + ad}, dec_dims{sd + dz};
  enc_dims.insert(enc_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dec_dims.insert(dec_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  enc_dims.push_back(2 * dz);
  dec_dims.push_back(ad);
  std::vector<approx::Activation> acts_fn(cfg.hidden.size(), approx::Activation::relu);
  acts_fn.push_back(approx::Activation::linear);
  p.nets_.encoder = approx::Mlp(enc_dims, acts_fn, rng);
  p.nets_.decoder = approx::Mlp(dec_dims, acts_fn, rng);

  approx::AdamState ae(p.nets_.encoder.param_count(), cfg.adam);
  approx::AdamState ad_state(p.nets_.decoder.param_count(), cfg.adam);
  Vec ge, gd;
  double trace_acc = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = draw_batch(train.size(), cfg.batch_size, rng);
    const Mat cb = gather(cond, idx), abatch = gather(acts, idx);
    Mat eps(dz, cfg.batch_size);
    for (Eigen::Index j = 0; j < eps.cols(); ++j)
      for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = standard_normal(rng);
    ge.setZero(static_cast<Eigen::Index>(p.nets_.encoder.param_count()));
    gd.setZero(static_cast<Eigen::Index>(p.nets_.decoder.param_count()));
    const double scale = 1.0 / cfg.batch_size;
    const CvaeLoss l = cvae_loss(p.nets_, cb, abatch, eps, cfg.log_sigma, scale, &ge, &gd);
    if (!std::isfinite(l.total()))
      throw TrainingDivergedError("CVAE loss became non-finite at step " + std::to_string(step));
    approx::adam_step(ae, p.nets_.encoder.params(), ge);
    approx::adam_step(ad_state, p.nets_.decoder.params(), gd);
    trace_acc += l.total() * scale;
    if ((step + 1) % kTraceEvery == 0) {
      p.loss_trace_.push_back(trace_acc / kTraceEvery);
      trace_acc = 0;
    }
  }
  return p;
}

void CvaePolicy::save(const std::string& path) const {
  approx::save_mlps(path, {&nets_.encoder, &nets_.decoder},
                    {{"model", "cvae_policy"},
                     {"latent_dim", nets_.latent_dim},
                     {"z_clip", z_clip_},
                     {"space", space_json(space_)},
                     {"cond_mean", to_vec(cond_mean_)},
                     {"cond_std", to_vec(cond_std_)}});
}

CvaePolicy CvaePolicy::load(const std::string& path) {
  nlohmann::json extra;
  auto nets = approx::load_mlps(path, &extra);
  if (extra.value("model", "") != "cvae_policy" || nets.size() != 2)
    throw IoError(path + ": not a CVAE policy checkpoint");
  CvaePolicy p;
  p.nets_ = {std::move(nets[0]), std::move(nets[1]), extra.at("latent_dim").get<int>()};
  p.z_clip_ = extra.at("z_clip");
  p.space_ = space_from(extra.at("space"));
  p.cond_mean_ = from_json(extra.at("cond_mean"));
  p.cond_std_ = from_json(extra.at("cond_std"));
  return p;
}

double rbc_loss(const approx::Mlp& net, const Mat& cond, const Mat& actions,
                approx::LogSigmaBounds bounds, double scale, Vec* grad) {
  approx::Tape tape;
  const auto head = approx::make_head(net.forward(cond, tape), bounds);
  if (!grad) return scale * approx::gaussian_nll(head, actions);
  Mat d_raw;
  const double loss = approx::gaussian_nll_grad(head, actions, scale, d_raw);
  net.backward(tape, d_raw, *grad);
  return loss;
}

std::array<double, 2> RbcPolicy::mean_action(const State& cond) const {
  const auto head = approx::make_head(net_.forward(normalize_cols(state_col(cond), cond_mean_, cond_std_)), bounds_);
  return {head.mu(0, 0), head.mu(1, 0)};
}

std::optional<Action> RbcPolicy::sample(const State& cond, Rng& rng) const {
  const auto head = approx::make_head(net_.forward(normalize_cols(state_col(cond), cond_mean_, cond_std_)), bounds_);
  const Mat a = approx::reparam_sample(head, rng);
  return space_.project(a(0, 0), a(1, 0));
}

RbcPolicy train_rbc_policy(const data::TransitionBuffer& train, dyn::Direction direction,
                           ActionSpace space, const RbcConfig& cfg, Rng& rng) {
  if (train.empty()) throw PreconditionError("RBC training needs a non-empty buffer");
  if (cfg.batch_size < 1 || cfg.steps < 0) throw ConfigError("invalid RBC batch size or steps");
  RbcPolicy p;
  p.space_ = space;
  p.bounds_ = cfg.log_sigma;
  const Mat raw = conditioning_matrix(train, direction);
  column_moments(raw, p.cond_mean_, p.cond_std_);
  const Mat cond = normalize_cols(raw, p.cond_mean_, p.cond_std_);
  const Mat acts = action_matrix(train);
  std::vector<int> dims{static_cast<int>(cond.rows())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(2 * static_cast<int>(acts.rows()));
  std::vector<approx::Activation> fns(cfg.hidden.size(), approx::Activation::relu);
  fns.push_back(approx::Activation::linear);
  p.net_ = approx::Mlp(dims, fns, rng);
  approx::AdamState adam(p.net_.param_count(), cfg.adam);
  Vec g;
  double trace_acc = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto idx = draw_batch(train.size(), cfg.batch_size, rng);
    g.setZero(static_cast<Eigen::Index>(p.net_.param_count()));
    const double l = rbc_loss(p.net_, gather(cond, idx), gather(acts, idx), cfg.log_sigma,
                              1.0 / cfg.batch_size, &g);
    if (!std::isfinite(l))
      throw TrainingDivergedError("RBC loss became non-finite at step " + std::to_string(step));
    approx::adam_step(adam, p.net_.params(), g);
    trace_acc += l;
    if ((step + 1) % kTraceEvery == 0) {
      p.loss_trace_.push_back(trace_acc / kTraceEvery);
      trace_acc = 0;
    }
  }
  return p;
}

void RbcPolicy::save(const std::string& path) const {
  approx::save_mlps(path, {&net_},
                    {{"model", "rbc_policy"},
                     {"space", space_json(space_)},
                     {"log_sigma", {bounds_.lo, bounds_.hi}},
                     {"cond_mean", to_vec(cond_mean_)},
                     {"cond_std", to_vec(cond_std_)}});
}

RbcPolicy RbcPolicy::load(const std::string& path) {
  nlohmann::json extra;
  auto nets = approx::load_mlps(path, &extra);
  if (extra.value("model", "") != "rbc_policy" || nets.size() != 1)
    throw IoError(path + ": not an RBC policy checkpoint");
  RbcPolicy p;
  p.net_ = std::move(nets[0]);
  p.space_ = space_from(extra.at("space"));
  p.bounds_ = {extra.at("log_sigma")[0].get<double>(), extra.at("log_sigma")[1].get<double>()};
  p.cond_mean_ = from_json(extra.at("cond_mean"));
  p.cond_std_ = from_json(extra.at("cond_std"));
  return p;
}

}  // namespace romilab::rollout
