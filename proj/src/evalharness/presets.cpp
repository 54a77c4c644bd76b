#include "romilab/evalharness/presets.h"

#include "romilab/core/error.h"

namespace romilab::eval {

using nlohmann::json;

json AblationPlan::to_json() const {
  json arms_j = json::array();
  for (const auto& a : arms) arms_j.push_back(a.resolved().to_json());
  return {{"name", name}, {"base", base.resolved().to_json()}, {"arms", arms_j},
          {"seeds", seeds},  {"assert", asserts},                {"jobs", jobs}};
}

AblationPlan ablation_from_json(const json& j, const RunConfig& defaults) {
  if (!j.is_object()) throw ConfigError("an ablation config must be an object");
  for (const auto& [k, _] : j.items())
    if (k != "name" && k != "base" && k != "arms" && k != "seeds" && k != "assert" && k != "jobs")
      throw ConfigError("unknown ablation key '" + k + "'");
  AblationPlan p;
  try {
    p.name = j.value("name", "ablation");
    p.base = j.contains("base") ? RunConfig::from_json(j.at("base"), defaults) : defaults;
    p.seeds = j.contains("seeds") ? j.at("seeds").get<std::vector<std::uint64_t>>() : p.base.seeds;
    p.jobs = j.value("jobs", p.base.jobs);
    if (j.contains("assert")) p.asserts = j.at("assert");
    if (!j.contains("arms") || !j.at("arms").is_array() || j.at("arms").empty())
      throw ConfigError("an ablation config needs a non-empty 'arms' list");
    for (const auto& a : j.at("arms")) {
      RunConfig c = RunConfig::from_json(a, p.base);
      c.seeds = p.seeds;
      p.arms.push_back(c);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid ablation config: ") + e.what());
  }
  if (p.seeds.empty()) throw ConfigError("an ablation config needs at least one seed");
  if (!p.asserts.is_array()) throw ConfigError("the assert block must be a list");
  return p;
}

std::vector<std::string> preset_names() {
  return {"paper-maze-ablation", "rollout-length", "eta-sweep", "rollout-policy", "point-model-error"};
}

json preset_json(const std::string& name) {
  const json grid_base = {{"env", {{"layout", "umaze"}, {"space", "grid"}, {"reward_mode", "sparse"}}},
                          {"data", {{"size", 50000}}},
                          {"rollout", {{"policy", "uniform"}, {"horizon", 5}, {"direction", "reverse"}}},
                          {"eta", 0.7}};
  if (name == "paper-maze-ablation") {
    return {{"name", name},
            {"base", grid_base},
            {"seeds", {0, 1, 2, 3, 4}},
            {"arms",
             {{{"label", "romi"}, {"rollout", {{"direction", "reverse"}}}},
              {{"label", "fomi"}, {"rollout", {{"direction", "forward"}}}},
              {{"label", "base"}, {"eta", 0.0}}}},
            {"assert",
             {{{"lhs", "romi.success_rate"}, {"op", ">="}, {"rhs", "base.success_rate"}, {"margin", 0.0}},
              {{"lhs", "romi.success_rate"}, {"op", ">="}, {"rhs", "fomi.success_rate"}, {"margin", 0.2}},
              {{"lhs", "fomi.collision_rate"}, {"op", ">"}, {"rhs", "romi.collision_rate"}, {"margin", 0.0}},
              {{"lhs", "romi.atd"}, {"op", "<="}, {"rhs", "fomi.atd"}, {"margin", 0.1}}}}};
  }
  if (name == "rollout-length") {
    json arms = json::array();
    for (int h : {1, 5, 10, 20})
      arms.push_back({{"label", "len=" + std::to_string(h)}, {"rollout", {{"horizon", h}}}});
    return {{"name", name}, {"base", grid_base}, {"seeds", {0, 1, 2}}, {"arms", arms}};
  }
  if (name == "eta-sweep") {
    json arms = json::array();
    for (const char* e : {"0.1", "0.3", "0.5", "0.7", "0.9"})
      arms.push_back({{"label", std::string("eta=") + e}, {"eta", std::stod(e)}});
    return {{"name", name}, {"base", grid_base}, {"seeds", {0, 1, 2}}, {"arms", arms}};
  }
  if (name == "rollout-policy") {
    json arms = json::array();
    for (const char* p : {"uniform", "empirical", "cvae", "rbc"})
      arms.push_back({{"label", p}, {"rollout", {{"policy", p}}}});
    arms.push_back({{"label", "base"}, {"eta", 0.0}});
    return {{"name", name}, {"base", grid_base}, {"seeds", {0, 1, 2}}, {"arms", arms}};
  }
  if (name == "point-model-error") {
    const json base = {
        {"env", {{"layout", "umaze"}, {"space", "point"}, {"reward_mode", "sparse"}}},
        {"data", {{"size", 20000}}},
        {"model",
         {{"kind", "ensemble"},
          {"holdout_size", 1000},
          {"ensemble", {{"max_epochs", 20}, {"max_steps_per_epoch", 40}}}}},
        {"rollout", {{"policy", "uniform"}, {"horizon", 5}}},
        {"learner", {{"steps", 50000}}},
        {"eval", {{"episodes", 50}, {"reference_episodes", 50}}},
        {"eta", 0.7}};
    return {{"name", name},
            {"base", base},
            {"seeds", {0, 1, 2}},
            {"arms",
             {{{"label", "romi"}, {"rollout", {{"direction", "reverse"}}}},
              {{"label", "fomi"}, {"rollout", {{"direction", "forward"}}}}}}};
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

AblationPlan preset(const std::string& name) { return ablation_from_json(preset_json(name)); }

}  // namespace romilab::eval
