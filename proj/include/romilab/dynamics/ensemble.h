#pragma once

#include <string>
#include <vector>

#include "romilab/approx/adam.h"
#include "romilab/approx/gaussian.h"
#include "romilab/approx/mlp.h"
#include "romilab/dataset/buffer.h"
#include "romilab/dynamics/model.h"

namespace romilab::dyn {

struct EnsembleConfig {
  Direction direction = Direction::reverse;
  int n_members = 7;
  int n_elites = 5;
  std::vector<int> hidden{64, 64, 64, 64};
  approx::Activation activation = approx::Activation::swish;
  approx::AdamConfig adam{};
  approx::LogSigmaBounds log_sigma{};
  int batch_size = 256;
  int max_epochs = 100;
  int patience = 5;  // holdout evaluations without improvement before stopping
  // Upper bound on gradient steps per epoch (0 = one full pass over train).
  int max_steps_per_epoch = 0;
  // Snap predicted states to integer cells (grid mazes).
  bool round_to_grid = false;
};

// Per-member training record.
struct MemberReport {
  int epochs = 0;
  double best_holdout_nll = 0.0;  // mean per holdout transition, normalized targets
};

// Ensemble of diagonal-Gaussian MLPs over normalized (delta state, reward)
// given normalized (conditioning state, action features).
class GaussianEnsemble final : public DynamicsModel {
 public:
  Direction direction() const override { return cfg_.direction; }
  const EnsembleConfig& config() const { return cfg_; }

  std::optional<Prediction> sample(const State& cond, const Action& a, Rng& rng) const override;
  // Mean over elites of each member's predicted mean.
  std::optional<State> mean_state(const State& cond, const Action& a) const override;

  // Gaussian head of one member for a batch of (cond, action) pairs, in
  // normalized target space.
  approx::GaussianHead member_head(std::size_t member, const std::vector<State>& cond,
                                   const std::vector<Action>& actions) const;

  const std::vector<approx::Mlp>& members() const { return members_; }
  const std::vector<int>& elites() const { return elites_; }
  const std::vector<MemberReport>& reports() const { return reports_; }
  std::size_t state_dim() const { return state_dim_; }

  void save(const std::string& path) const;
  static GaussianEnsemble load(const std::string& path);

  // The K lowest-NLL indices, ascending by NLL with ties broken by index.
  static std::vector<int> select_elites(const std::vector<double>& holdout_nll, int k);

  friend GaussianEnsemble fit_gaussian_ensemble(const data::TransitionBuffer& train,
                                                const data::TransitionBuffer& holdout,
                                                const EnsembleConfig& cfg, Rng& rng);

 private:
  approx::Mat encode_inputs(const std::vector<State>& cond, const std::vector<Action>& actions) const;
  State decode_state(const State& cond, const approx::Vec& target_norm) const;
  double decode_reward(const approx::Vec& target_norm) const;

  EnsembleConfig cfg_;
  std::size_t state_dim_ = 0;
  std::vector<approx::Mlp> members_;
  std::vector<int> elites_;
  std::vector<MemberReport> reports_;
  approx::Vec in_mean_, in_std_, out_mean_, out_std_;
};

// Trains every member independently (own init and shuffling stream) with
// early stopping on holdout NLL, then keeps the n_elites best as elites.
// A non-finite loss raises TrainingDivergedError naming the member.
GaussianEnsemble fit_gaussian_ensemble(const data::TransitionBuffer& train,
                                       const data::TransitionBuffer& holdout,
                                       const EnsembleConfig& cfg, Rng& rng);

}  // namespace romilab::dyn
