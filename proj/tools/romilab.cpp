// romilab: experiment runner for reverse/forward model-based imagination on
// in-repo mazes. Exit codes: 0 ok, 2 config error, 3 stage failure,
// 4 assertion failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "romilab/core/container.h"
#include "romilab/core/error.h"
#include "romilab/dataset/io.h"
#include "romilab/evalharness/ablation.h"
#include "romilab/evalharness/pipeline.h"
#include "romilab/evalharness/presets.h"
#include "romilab/evalharness/svg.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace romilab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitAssert = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
  std::optional<double> eta;
  std::optional<int> horizon;
  std::string direction;
  std::string policy;
  std::string algo;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "root seed (replaces the config's seed list)");
  sub->add_option("--jobs", c.jobs, "parallel workers");
  sub->add_option("--out", c.out, "output directory (default $ROMI_LAB_OUT/<command> or runs/<command>)");
  sub->add_option("--eta", c.eta, "fraction of each minibatch drawn from imagined data");
  sub->add_option("--horizon", c.horizon, "rollout horizon");
  sub->add_option("--direction", c.direction, "imagination direction: reverse | forward");
  sub->add_option("--policy", c.policy, "rollout policy: uniform | empirical | cvae | rbc");
  sub->add_option("--algo", c.algo, "learner: bcq_discrete | cql_discrete");
}

void log(const std::string& msg) { std::cerr << "[romilab] " << msg << "\n"; }

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

// Command-line overrides as a config patch; flags win over the file.
json flag_patch(const Common& c) {
  json p = json::object();
  if (c.seed) p["seeds"] = {*c.seed};
  if (c.jobs) p["jobs"] = *c.jobs;
  if (c.eta) p["eta"] = *c.eta;
  if (c.horizon) p["rollout"]["horizon"] = *c.horizon;
  if (!c.direction.empty()) p["rollout"]["direction"] = c.direction;
  if (!c.policy.empty()) p["rollout"]["policy"] = c.policy;
  if (!c.algo.empty()) p["learner"]["algo"] = c.algo;
  return p;
}

void log_overrides(const json& patch, const std::string& prefix = "") {
  for (const auto& [k, v] : patch.items()) {
    if (v.is_object()) log_overrides(v, prefix + k + ".");
    else log("flag override " + prefix + k + " = " + v.dump());
  }
}

eval::RunConfig load_run_config(const Common& c) {
  eval::RunConfig cfg;
  if (!c.config.empty()) {
    json j = read_json_file(c.config);
    cfg = eval::RunConfig::from_json(j, cfg);
    log("config " + c.config);
  }
  const json patch = flag_patch(c);
  log_overrides(patch);
  cfg = eval::RunConfig::from_json(patch, cfg);
  cfg.validate();
  return cfg.resolved();
}

std::string out_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  if (const char* root = std::getenv("ROMI_LAB_OUT"); root && *root) return (fs::path(root) / command).string();
  return (fs::path("runs") / command).string();
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

data::TransitionBuffer dataset_or_generate(const std::string& path, const eval::RunConfig& cfg,
                                           const env::MazeSpec& spec, std::uint64_t seed) {
  if (!path.empty()) {
    eval::RunConfig c = cfg;
    c.dataset_path = path;
    return eval::stage_dataset(c, spec, seed);
  }
  log("generating dataset for seed " + std::to_string(seed));
  return eval::stage_dataset(cfg, spec, seed);
}

void write_config(const std::string& dir, const eval::RunConfig& cfg) {
  fs::create_directories(dir);
  write_text_file(join(dir, "resolved_config.json"), cfg.to_json().dump(2) + "\n");
}

int cmd_gen_data(const Common& c, std::optional<std::size_t> size) {
  Common cc = c;
  auto cfg = [&] {
    eval::RunConfig base = load_run_config(cc);
    if (size) {
      base = eval::RunConfig::from_json(json{{"data", {{"size", *size}}}}, base);
      log("flag override data.size = " + std::to_string(*size));
    }
    base.validate();
    return base.resolved();
  }();
  const auto spec = eval::make_spec(cfg);
  const auto dir = out_dir(c, "gen-data");
  write_config(dir, cfg);
  for (auto seed : cfg.seeds) {
    const auto buf = eval::stage_dataset(cfg, spec, seed);
    const std::string sub = cfg.seeds.size() > 1 ? join(dir, "seed_" + std::to_string(seed)) : dir;
    fs::create_directories(sub);
    data::write_buffer(join(sub, "dataset.bin"), buf);
    std::size_t collisions = 0, done = 0;
    for (const auto& t : buf.transitions) {
      collisions += t.collided ? 1 : 0;
      done += t.done ? 1 : 0;
    }
    const json manifest = {{"kind", "dataset_manifest"},
                           {"seed", seed},
                           {"layout", spec.layout_id},
                           {"space", env::to_string(spec.space)},
                           {"reward_mode", env::to_string(spec.reward_mode)},
                           {"transitions", buf.size()},
                           {"episodes", buf.episodes().size()},
                           {"goal_transitions", done},
                           {"collisions", collisions},
                           {"checksum", data::buffer_checksum(buf)}};
    write_text_file(join(sub, "manifest.json"), manifest.dump(2) + "\n");
    log("wrote " + join(sub, "dataset.bin") + " (" + std::to_string(buf.size()) + " transitions, " +
        std::to_string(collisions) + " collisions)");
  }
  return 0;
}

int cmd_fit_model(const Common& c, const std::string& dataset_path) {
  const auto cfg = load_run_config(c);
  const auto spec = eval::make_spec(cfg);
  const auto dir = out_dir(c, "fit-model");
  write_config(dir, cfg);
  std::vector<dyn::ModelErrorReport> reports;
  for (auto seed : cfg.seeds) {
    const auto buf = dataset_or_generate(dataset_path, cfg, spec, seed);
    const auto t = eval::stage_models(cfg, spec, buf, seed);
    const std::string sub = cfg.seeds.size() > 1 ? join(dir, "seed_" + std::to_string(seed)) : dir;
    fs::create_directories(sub);
    eval::save_model(join(sub, "model_forward.bin"), *t.forward);
    eval::save_model(join(sub, "model_reverse.bin"), *t.reverse);
    write_text_file(join(sub, "model_error.csv"), dyn::model_error_csv({t.error}));
    reports.push_back(t.error);
    log("seed " + std::to_string(seed) + ": forward mse " + std::to_string(t.error.forward.mse) + ", reverse mse " +
        std::to_string(t.error.reverse.mse));
  }
  write_text_file(join(dir, "model_error_table.csv"), dyn::model_error_table(reports));
  if (cfg.seeds.size() > 1) write_text_file(join(dir, "model_error.csv"), dyn::model_error_csv(reports));
  std::cout << dyn::model_error_table(reports);
  return 0;
}

int cmd_imagine(const Common& c, const std::string& dataset_path, const std::string& model_path) {
  const auto cfg = load_run_config(c);
  const auto spec = eval::make_spec(cfg);
  const auto seed = cfg.seeds.front();
  const auto dir = out_dir(c, "imagine");
  write_config(dir, cfg);
  const auto buf = dataset_or_generate(dataset_path, cfg, spec, seed);
  std::shared_ptr<const dyn::DynamicsModel> model;
  if (!model_path.empty()) {
    model = eval::load_model(model_path);
  } else {
    auto mp = eval::stage_models(cfg, spec, buf, seed);
    model = cfg.imagination.direction == dyn::Direction::forward ? mp.forward : mp.reverse;
  }
  if (model->direction() != cfg.imagination.direction)
    throw ConfigError("model '" + model_path + "' is a " + dyn::to_string(model->direction()) +
                      " model but the config asks for " + dyn::to_string(cfg.imagination.direction) + " imagination");
  const auto policy = eval::stage_rollout_policy(cfg, spec, buf, seed);
  const auto res = rollout::imagine(*model, *policy, buf, cfg.imagination, spec, derive_seed(seed, "rollout"),
                                    cfg.jobs);
  data::write_buffer(join(dir, "imagined.bin"), res.buffer);
  write_text_file(join(dir, "rollout_report.json"), res.report.to_json().dump(2) + "\n");
  log("wrote " + std::to_string(res.buffer.size()) + " imagined transitions to " + join(dir, "imagined.bin"));
  return 0;
}

int cmd_train(const Common& c, const std::string& dataset_path, const std::string& imagined_path) {
  const auto cfg = load_run_config(c);
  const auto spec = eval::make_spec(cfg);
  const auto seed = cfg.seeds.front();
  const auto dir = out_dir(c, "train");
  write_config(dir, cfg);
  const auto buf = dataset_or_generate(dataset_path, cfg, spec, seed);
  data::TransitionBuffer imagined;
  if (!imagined_path.empty()) imagined = data::read_buffer(imagined_path);
  else if (cfg.eta > 0) throw ConfigError("eta > 0 needs --imagined (or use eta 0 for the base learner)");
  Rng rng = make_rng(seed, "learner");
  learn::TrainStats stats;
  const auto q = learn::train_policy(buf, imagined, cfg.eta, cfg.learner, spec, rng, &stats);
  learn::save_qtable(join(dir, "qtable.json"), q);
  const json st = {{"steps", stats.steps},
                   {"updates", stats.updates},
                   {"bcq_fallbacks", stats.bcq_fallbacks},
                   {"final_mean_abs_td", stats.final_mean_abs_td},
                   {"states", q.values().size()}};
  write_text_file(join(dir, "train_stats.json"), st.dump(2) + "\n");
  log("wrote " + join(dir, "qtable.json"));
  return 0;
}

int cmd_eval(const Common& c, const std::string& dataset_path, const std::string& qtable_path) {
  if (qtable_path.empty()) throw ConfigError("eval needs --qtable");
  const auto cfg = load_run_config(c);
  const auto spec = eval::make_spec(cfg);
  const auto seed = cfg.seeds.front();
  const auto dir = out_dir(c, "eval");
  write_config(dir, cfg);
  const auto buf = dataset_or_generate(dataset_path, cfg, spec, seed);
  const auto q = learn::load_qtable(qtable_path);
  const auto ref = eval::compute_reference(spec, cfg.reference_episodes, cfg.reference_seed);
  Rng rng = make_rng(seed, "eval");
  const auto episodes = eval::run_episodes(spec, q, cfg.learner, cfg.eval_episodes, rng);
  const eval::DiscrepancyIndex index(buf, spec.space == env::SpaceKind::point);
  const auto rep = eval::summarize(cfg.label, seed, episodes, index, ref);
  const std::string csv = eval::eval_csv_header() + "\n" + eval::eval_csv_row(rep, "seed") + "\n";
  write_text_file(join(dir, "eval.csv"), csv);
  write_text_file(join(dir, "trajectories.svg"), eval::trajectories_svg(spec, buf, episodes));
  std::cout << csv;
  return 0;
}

int cmd_pipeline(const Common& c) {
  const auto cfg = load_run_config(c);
  const auto dir = out_dir(c, "pipeline");
  const auto reports = eval::run_pipeline_dir(cfg, dir);
  std::cout << eval::eval_csv_header() << "\n";
  for (const auto& r : reports) std::cout << eval::eval_csv_row(r, "seed") << "\n";
  std::cout << eval::eval_csv_row(eval::aggregate(cfg.label, reports), "aggregate") << "\n";
  log("run directory " + dir);
  return 0;
}

int cmd_ablate(const Common& c, const std::string& preset_name, bool print_only) {
  json j;
  if (!preset_name.empty() && !c.config.empty()) throw ConfigError("use either --preset or --config, not both");
  if (!preset_name.empty()) j = eval::preset_json(preset_name);
  else if (!c.config.empty()) j = read_json_file(c.config);
  else throw ConfigError("ablate needs --preset NAME or --config FILE");
  json patch = flag_patch(c);
  log_overrides(patch);
  if (patch.contains("seeds")) {
    j["seeds"] = patch["seeds"];
    patch.erase("seeds");
  }
  if (patch.contains("jobs")) {
    j["jobs"] = patch["jobs"];
    patch.erase("jobs");
  }
  if (!patch.empty()) {
    // Flags land on the base config; arm entries still override them.
    log("flag overrides apply to the base config of every arm");
    if (!j.contains("base")) j["base"] = json::object();
    j["base"].merge_patch(patch);
  }
  const auto plan = eval::ablation_from_json(j);
  if (print_only) {
    std::cout << plan.to_json().dump(2) << "\n";
    return 0;
  }
  const auto dir = out_dir(c, "ablate");
  fs::create_directories(dir);
  write_text_file(join(dir, "ablation_config.json"), plan.to_json().dump(2) + "\n");
  eval::AblationOptions opt;
  opt.jobs = plan.jobs;
  log("running " + std::to_string(plan.arms.size()) + " arms x " + std::to_string(plan.seeds.size()) + " seeds");
  const auto res = eval::run_ablation_grid(plan.arms, plan.seeds, opt);
  eval::write_ablation_report(dir, res, plan.arms);
  std::cout << res.markdown();
  int code = 0;
  if (!res.checksums_consistent) {
    log("arms saw different datasets for the same seed");
    code = kExitStage;
  }
  if (res.failures() > 0) {
    for (const auto& cell : res.cells)
      if (!cell.ok) log("cell " + cell.arm + "/seed " + std::to_string(cell.seed) + " failed: " + cell.error);
    code = kExitStage;
  }
  const auto outcomes = eval::evaluate_assertions(res, plan.asserts);
  std::ostringstream txt;
  for (const auto& a : outcomes) txt << (a.pass ? "PASS " : "FAIL ") << a.text << "\n";
  write_text_file(join(dir, "assertions.txt"), txt.str());
  std::cout << txt.str();
  for (const auto& a : outcomes)
    if (!a.pass) code = kExitAssert;
  log("report directory " + dir);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"romilab: reverse and forward model-based imagination on in-repo mazes"};
  app.require_subcommand(1);

  Common c_gen, c_fit, c_img, c_train, c_eval, c_pipe, c_abl;
  std::optional<std::size_t> size;
  std::string dataset_fit, dataset_img, model_img, dataset_train, imagined_train, dataset_eval, qtable_eval, preset;
  bool print_only = false;

  auto* gen = app.add_subcommand("gen-data", "generate a wall-blind behavior dataset");
  add_common(gen, c_gen);
  gen->add_option("--size", size, "number of transitions");
  auto* fit = app.add_subcommand("fit-model", "fit forward and reverse models and report one-step error");
  add_common(fit, c_fit);
  fit->add_option("--dataset", dataset_fit, "dataset.bin (default: generate from the config)");
  auto* img = app.add_subcommand("imagine", "generate imagined rollouts");
  add_common(img, c_img);
  img->add_option("--dataset", dataset_img, "dataset.bin (default: generate from the config)");
  img->add_option("--model", model_img, "model checkpoint (default: fit from the config)");
  auto* train = app.add_subcommand("train", "train the tabular offline learner");
  add_common(train, c_train);
  train->add_option("--dataset", dataset_train, "dataset.bin (default: generate from the config)");
  train->add_option("--imagined", imagined_train, "imagined.bin");
  auto* ev = app.add_subcommand("eval", "evaluate a trained Q table");
  add_common(ev, c_eval);
  ev->add_option("--dataset", dataset_eval, "dataset.bin used for trajectory discrepancy");
  ev->add_option("--qtable", qtable_eval, "qtable.json")->required();
  auto* pipe = app.add_subcommand("pipeline", "data, models, imagination, training and evaluation end to end");
  add_common(pipe, c_pipe);
  auto* abl = app.add_subcommand("ablate", "run an ablation grid");
  add_common(abl, c_abl);
  std::string names;
  for (const auto& n : eval::preset_names()) names += (names.empty() ? "" : ", ") + n;
  abl->add_option("--preset", preset, "built-in grid: " + names);
  abl->add_flag("--print-config", print_only, "print the resolved grid and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(c_gen, size);
    if (fit->parsed()) return cmd_fit_model(c_fit, dataset_fit);
    if (img->parsed()) return cmd_imagine(c_img, dataset_img, model_img);
    if (train->parsed()) return cmd_train(c_train, dataset_train, imagined_train);
    if (ev->parsed()) return cmd_eval(c_eval, dataset_eval, qtable_eval);
    if (pipe->parsed()) return cmd_pipeline(c_pipe);
    if (abl->parsed()) return cmd_ablate(c_abl, preset, print_only);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const eval::StageError& e) {
    std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
