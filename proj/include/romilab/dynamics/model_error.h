#pragma once

#include <string>
#include <vector>

#include "romilab/dataset/buffer.h"
#include "romilab/dynamics/model.h"

namespace romilab::dyn {

struct DirectionError {
  double mse = 0.0;              // mean over holdout transitions and state dimensions
  std::vector<double> per_dim;   // mean over holdout transitions, one per state dimension
  std::size_t evaluated = 0;
  std::size_t skipped = 0;       // holdout pairs the model had no data for
};

struct ModelErrorReport {
  std::string dataset_type;  // reward mode, e.g. "sparse"
  std::string environment;   // layout label
  std::uint64_t seed = 0;
  DirectionError forward;
  DirectionError reverse;
};

// One-step error of the model's mean prediction of the target state
// (s' for forward models, s for reverse models), in raw state units.
DirectionError evaluate_direction(const DynamicsModel& model, const data::TransitionBuffer& holdout);

ModelErrorReport evaluate_model_error(const DynamicsModel& forward, const DynamicsModel& reverse,
                                      const data::TransitionBuffer& holdout);

// One row per report (seed) with per-dimension columns.
std::string model_error_csv(const std::vector<ModelErrorReport>& reports);

// Aggregated over seeds, one row per (dataset_type, environment):
// dataset_type,environment,forward_model,reverse_model,... where the model
// columns read "mean ± std".
std::string model_error_table(const std::vector<ModelErrorReport>& reports);

}  // namespace romilab::dyn
