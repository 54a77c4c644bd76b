#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "romilab/dynamics/model_error.h"
#include "romilab/evalharness/metrics.h"
#include "romilab/evalharness/pipeline.h"

namespace romilab::eval {

struct AblationCell {
  std::string arm;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // stage-prefixed message when !ok
  std::string dataset_checksum;
  EvalReport report;
  std::vector<Trajectory> sample_episodes;  // first few, for plots
};

struct AblationResult {
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  std::string environment;  // "<reward mode>-<layout>"
  std::vector<AblationCell> cells;      // arm-major: cells[a * seeds.size() + s]
  std::vector<EvalReport> aggregates;   // per arm, over successful cells
  std::vector<dyn::ModelErrorReport> model_errors;  // per (seed, distinct model config)
  int base_arm = -1;  // Delta reference, -1 when no arm qualifies
  int best_arm = -1;  // highest mean normalized score
  bool checksums_consistent = true;  // every arm saw the same D_env per seed

  const AblationCell& cell(std::size_t arm, std::size_t seed) const { return cells[arm * seeds.size() + seed]; }
  std::size_t failures() const;

  // Per-cell and aggregate rows with delta and best columns.
  std::string csv() const;
  // Aggregate "mean ± std" table with a Delta column.
  std::string markdown() const;
  // One row for the environment, one "mean ± std" normalized-score column per arm.
  std::string sweep_csv() const;
};

struct AblationOptions {
  int jobs = 1;
  std::string base_label = "base";  // otherwise the first arm with eta == 0
  std::size_t sample_episodes = 20;
};

// Runs every (arm, seed) pipeline. Arms must share env and data settings;
// each seed's D_env is generated once and reused by every arm, and fitted
// models are shared between arms with equal model settings. Cell failures
// are recorded and the grid continues.
AblationResult run_ablation_grid(const std::vector<RunConfig>& arms, const std::vector<std::uint64_t>& seeds,
                                 const AblationOptions& opt = {});

// Writes grid.csv, grid.md, sweep.csv, model_error.csv, model_error_table.csv
// and SVG plots into `dir`.
void write_ablation_report(const std::string& dir, const AblationResult& r, const std::vector<RunConfig>& arms);

struct AssertionOutcome {
  std::string text;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

// Each entry: {"lhs": "<arm>.<metric>", "op": ">"|">="|"<"|"<="|"==",
// "rhs": number or "<arm>.<metric>", "margin": number (default 0)}; checks
// lhs op rhs + margin on aggregate values. Metrics: success_rate,
// collision_rate, normalized_score, raw_return, atd. ConfigError on a
// malformed entry.
std::vector<AssertionOutcome> evaluate_assertions(const AblationResult& r, const nlohmann::json& block);

}  // namespace romilab::eval
