#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "romilab/core/error.h"
#include "romilab/dataset/buffer.h"
#include "romilab/dynamics/ensemble.h"
#include "romilab/dynamics/model_error.h"
#include "romilab/dynamics/tabular.h"
#include "romilab/env/maze.h"
#include "romilab/env/planner.h"
#include "romilab/evalharness/metrics.h"
#include "romilab/learner/qlearn.h"
#include "romilab/rollout/imagine.h"
#include "romilab/rollout/policy.h"

namespace romilab::eval {

enum class ModelKind { tabular, ensemble };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

// One full pipeline configuration (one ablation arm). Serialized as nested
// JSON; see RunConfig::to_json for the key layout.
struct RunConfig {
  std::string label = "romi";

  // env
  std::string layout = "umaze";
  std::string layout_file;  // overrides `layout` when set
  env::SpaceKind space = env::SpaceKind::grid;
  env::RewardMode reward_mode = env::RewardMode::sparse;
  int episode_limit = 0;  // 0 = layout default

  // data
  std::size_t dataset_size = 50000;
  std::string dataset_path;  // load instead of generating when set
  env::PlannerConfig planner;

  // model
  ModelKind model_kind = ModelKind::tabular;
  double epsilon_lap = 0.0;
  dyn::TabularFallback tabular_fallback = dyn::TabularFallback::displacement;
  std::size_t holdout_size = 1000;
  dyn::EnsembleConfig ensemble;

  // rollout
  rollout::PolicyKind rollout_policy = rollout::PolicyKind::uniform;
  rollout::ImaginationConfig imagination;
  rollout::CvaeConfig cvae;
  rollout::RbcConfig rbc;

  double eta = 0.7;
  learn::LearnerConfig learner;

  // eval
  int eval_episodes = 100;
  int reference_episodes = 100;
  std::uint64_t reference_seed = 0;

  std::vector<std::uint64_t> seeds{0};
  int jobs = 1;

  nlohmann::json to_json() const;
  // Applies `j` on top of `base`. Unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);
  static RunConfig from_json(const nlohmann::json& j);
  // Throws ConfigError on invalid values.
  void validate() const;
  // Copy with defaults made explicit (episode limit, unseen value, grid
  // rounding), as logged in resolved_config.json.
  RunConfig resolved() const;

  // Canonical JSON of the fields that determine D_env and the fitted models;
  // arms with equal keys can share both.
  std::string data_key() const;
  std::string model_key() const;
};

env::MazeSpec make_spec(const RunConfig& cfg);

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Forward and reverse models fit on the same split, plus their one-step error.
struct ModelPair {
  std::shared_ptr<const dyn::DynamicsModel> forward;
  std::shared_ptr<const dyn::DynamicsModel> reverse;
  dyn::ModelErrorReport error;
  const dyn::DynamicsModel& get(dyn::Direction d) const { return d == dyn::Direction::forward ? *forward : *reverse; }
};

// Stages, each drawing from its named RNG sub-stream of `seed`.
data::TransitionBuffer stage_dataset(const RunConfig& cfg, const env::MazeSpec& spec, std::uint64_t seed);
ModelPair stage_models(const RunConfig& cfg, const env::MazeSpec& spec, const data::TransitionBuffer& dataset,
                       std::uint64_t seed);
std::unique_ptr<rollout::RolloutPolicy> stage_rollout_policy(const RunConfig& cfg, const env::MazeSpec& spec,
                                                             const data::TransitionBuffer& dataset,
                                                             std::uint64_t seed);

struct PipelineResult {
  std::uint64_t seed = 0;
  data::TransitionBuffer dataset;
  std::string dataset_checksum;
  std::shared_ptr<const ModelPair> models;
  std::unique_ptr<rollout::RolloutPolicy> policy;
  rollout::ImaginationResult imagination;
  learn::QTable q;
  learn::TrainStats train_stats;
  RefEntry reference;
  std::vector<Trajectory> episodes;
  EvalReport report;
};

struct PipelineInputs {
  const data::TransitionBuffer* dataset = nullptr;  // reuse instead of stage_dataset
  std::shared_ptr<const ModelPair> models;          // reuse instead of stage_models
  const RefEntry* reference = nullptr;
};

// Runs data -> models -> imagination -> learner -> evaluation for one seed.
// Failures are rethrown as StageError naming the stage.
PipelineResult run_pipeline(const RunConfig& cfg, std::uint64_t seed, const PipelineInputs& inputs = {});

// Writes the per-seed artifacts (dataset, checkpoints, reports, plots).
void write_pipeline_artifacts(const std::string& dir, const RunConfig& cfg, const PipelineResult& r);

// Runs every seed of `cfg` and writes <out>/seed_<n>/... plus <out>/eval.csv
// (per-seed rows and an aggregate row) and <out>/resolved_config.json.
std::vector<EvalReport> run_pipeline_dir(const RunConfig& cfg, const std::string& out_dir);

// Loads a tabular or ensemble checkpoint by its container kind.
std::shared_ptr<const dyn::DynamicsModel> load_model(const std::string& path);
void save_model(const std::string& path, const dyn::DynamicsModel& model);

// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace romilab::eval
