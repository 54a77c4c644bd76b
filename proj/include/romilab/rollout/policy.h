#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "romilab/approx/adam.h"
#include "romilab/approx/gaussian.h"
#include "romilab/approx/mlp.h"
#include "romilab/core/spatial.h"
#include "romilab/dataset/buffer.h"
#include "romilab/dynamics/model.h"
#include "romilab/env/maze.h"

namespace romilab::rollout {

enum class PolicyKind { uniform, empirical, cvae, rbc };
std::string to_string(PolicyKind k);
PolicyKind parse_policy_kind(std::string_view s);

// Grid: 4 discrete moves. Point: force box [-1, 1]^2.
struct ActionSpace {
  bool discrete = true;
  int n_actions = kGridActions;
  double lo = -1.0, hi = 1.0;

  static ActionSpace of(const env::MazeSpec& spec);
  // Clamps a force, or snaps a 2-vector to the grid move with the largest
  // dot product (lowest index on ties).
  Action project(double u0, double u1) const;
};

// Generator of actions conditioned on a state: s' for reverse rollouts,
// s for forward ones. nullopt is the no-data signal.
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual PolicyKind kind() const = 0;
  virtual std::optional<Action> sample(const State& cond, Rng& rng) const = 0;
};

class UniformPolicy final : public RolloutPolicy {
 public:
  explicit UniformPolicy(ActionSpace space) : space_(space) {}
  PolicyKind kind() const override { return PolicyKind::uniform; }
  std::optional<Action> sample(const State& cond, Rng& rng) const override;

 private:
  ActionSpace space_;
};

// Actions of dataset transitions whose conditioning state matches: exact
// match for discrete states, k nearest by L2 for continuous ones.
class EmpiricalPolicy final : public RolloutPolicy {
 public:
  EmpiricalPolicy(const data::TransitionBuffer& buf, dyn::Direction direction, bool discrete_states,
                  std::size_t k = 10);
  PolicyKind kind() const override { return PolicyKind::empirical; }
  std::optional<Action> sample(const State& cond, Rng& rng) const override;

 private:
  bool discrete_;
  std::size_t k_;
  std::map<State, std::vector<Action>> exact_;
  std::vector<Action> actions_;
  SpatialIndex index_;
};

struct CvaeConfig {
  std::vector<int> hidden{128, 128};
  int latent_dim = 0;  // 0 = 2 x action feature dim
  double z_clip = 0.5;
  approx::AdamConfig adam{};
  approx::LogSigmaBounds log_sigma{};
  int batch_size = 256;
  int steps = 3000;
};

// Encoder E(s_cond, a) -> (mu_z, log sigma_z); decoder D(s_cond, z) -> a.
struct CvaeNets {
  approx::Mlp encoder;
  approx::Mlp decoder;
  int latent_dim = 0;
};

struct CvaeLoss {
  double reconstruction = 0.0;  // sum over batch of ||a - D(s, z)||^2
  double kl = 0.0;              // sum over batch of KL(E(s, a) || N(0, I))
  double total() const { return reconstruction + kl; }
};

// Loss over a batch (columns) with fixed reparameterization noise `eps`.
// `cond` must already be normalized. Gradients of `scale * total` are
// accumulated into g_enc / g_dec when given.
CvaeLoss cvae_loss(const CvaeNets& nets, const approx::Mat& cond, const approx::Mat& actions,
                   const approx::Mat& eps, approx::LogSigmaBounds bounds, double scale = 1.0,
                   approx::Vec* g_enc = nullptr, approx::Vec* g_dec = nullptr);

class CvaePolicy final : public RolloutPolicy {
 public:
  PolicyKind kind() const override { return PolicyKind::cvae; }
  std::optional<Action> sample(const State& cond, Rng& rng) const override;

  const CvaeNets& nets() const { return nets_; }
  CvaeNets& nets() { return nets_; }
  const std::vector<double>& loss_trace() const { return loss_trace_; }
  void set_space(ActionSpace s) { space_ = s; }

  void save(const std::string& path) const;
  static CvaePolicy load(const std::string& path);

  friend CvaePolicy train_cvae_policy(const data::TransitionBuffer&, dyn::Direction, ActionSpace,
                                      const CvaeConfig&, Rng&);
  // Test hook: a policy around hand-built networks with identity input
  // normalization.
  static CvaePolicy from_nets(CvaeNets nets, ActionSpace space, std::size_t state_dim, double z_clip);

 private:
  CvaeNets nets_;
  ActionSpace space_;
  double z_clip_ = 0.5;
  approx::Vec cond_mean_, cond_std_;
  std::vector<double> loss_trace_;
};

CvaePolicy train_cvae_policy(const data::TransitionBuffer& train, dyn::Direction direction,
                             ActionSpace space, const CvaeConfig& cfg, Rng& rng);

struct RbcConfig {
  std::vector<int> hidden{128, 128};
  approx::AdamConfig adam{};
  approx::LogSigmaBounds log_sigma{};
  int batch_size = 256;
  int steps = 3000;
};

// NLL of actions under the Gaussian policy net (cond -> (mu_a, log sigma_a)),
// summed over the batch, with gradient of `scale * nll` into `grad`.
double rbc_loss(const approx::Mlp& net, const approx::Mat& cond, const approx::Mat& actions,
                approx::LogSigmaBounds bounds, double scale = 1.0, approx::Vec* grad = nullptr);

class RbcPolicy final : public RolloutPolicy {
 public:
  PolicyKind kind() const override { return PolicyKind::rbc; }
  std::optional<Action> sample(const State& cond, Rng& rng) const override;
  // Mean action for a conditioning state (before projection).
  std::array<double, 2> mean_action(const State& cond) const;

  const approx::Mlp& net() const { return net_; }
  const std::vector<double>& loss_trace() const { return loss_trace_; }

  void save(const std::string& path) const;
  static RbcPolicy load(const std::string& path);

  friend RbcPolicy train_rbc_policy(const data::TransitionBuffer&, dyn::Direction, ActionSpace,
                                    const RbcConfig&, Rng&);

 private:
  approx::Mlp net_;
  ActionSpace space_;
  approx::LogSigmaBounds bounds_;
  approx::Vec cond_mean_, cond_std_;
  std::vector<double> loss_trace_;
};

RbcPolicy train_rbc_policy(const data::TransitionBuffer& train, dyn::Direction direction,
                           ActionSpace space, const RbcConfig& cfg, Rng& rng);

// Raw conditioning-state matrix and action-feature matrix of a buffer.
approx::Mat conditioning_matrix(const data::TransitionBuffer& buf, dyn::Direction direction);
approx::Mat action_matrix(const data::TransitionBuffer& buf);

}  // namespace romilab::rollout
