#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "romilab/evalharness/pipeline.h"

namespace romilab::eval {

// An ablation grid description: arms, seeds and the optional assert block.
struct AblationPlan {
  std::string name;
  RunConfig base;
  std::vector<RunConfig> arms;
  std::vector<std::uint64_t> seeds;
  nlohmann::json asserts = nlohmann::json::array();
  int jobs = 1;

  nlohmann::json to_json() const;
};

// {"name", "base": {RunConfig overrides}, "arms": [{"label", overrides...}],
// "seeds": [...], "assert": [...], "jobs"}. Arm entries are applied on top
// of the base; seeds default to the base config's seeds.
AblationPlan ablation_from_json(const nlohmann::json& j, const RunConfig& defaults = RunConfig{});

// Built-in grids: paper-maze-ablation, rollout-length, eta-sweep,
// rollout-policy, point-model-error.
std::vector<std::string> preset_names();
AblationPlan preset(const std::string& name);
nlohmann::json preset_json(const std::string& name);

}  // namespace romilab::eval
