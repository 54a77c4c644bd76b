#include "romilab/evalharness/pipeline.h"

#include <atomic>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "romilab/core/container.h"
#include "romilab/dataset/io.h"
#include "romilab/evalharness/svg.h"

namespace romilab::eval {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ModelKind k) { return k == ModelKind::tabular ? "tabular" : "ensemble"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "tabular") return ModelKind::tabular;
  if (s == "ensemble") return ModelKind::ensemble;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

namespace {

json adam_json(const approx::AdamConfig& a) { return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}}; }
approx::AdamConfig adam_from(const json& j) { return {j.at("lr"), j.at("beta1"), j.at("beta2"), j.at("eps")}; }
json bounds_json(const approx::LogSigmaBounds& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }
approx::LogSigmaBounds bounds_from(const json& j) { return {j.at("lo"), j.at("hi")}; }

void check_keys(const json& user, const json& ref, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (const auto& [k, v] : user.items()) {
    if (!ref.contains(k)) throw ConfigError("unknown config key '" + path + k + "'");
    if (v.is_object() && ref.at(k).is_object()) check_keys(v, ref.at(k), path + k + ".");
  }
}

}  // namespace

json RunConfig::to_json() const {
  const auto& e = ensemble;
  return {
      {"label", label},
      {"env",
       {{"layout", layout},
        {"layout_file", layout_file},
        {"space", env::to_string(space)},
        {"reward_mode", env::to_string(reward_mode)},
        {"episode_limit", episode_limit}}},
      {"data",
       {{"size", dataset_size},
        {"path", dataset_path},
        {"planner",
         {{"switch_radius", planner.switch_radius},
          {"cruise_speed", planner.cruise_speed},
          {"velocity_gain", planner.velocity_gain},
          {"approach_gain", planner.approach_gain},
          {"action_noise", planner.action_noise},
          {"max_waypoint_draws", planner.max_waypoint_draws}}}}},
      {"model",
       {{"kind", to_string(model_kind)},
        {"epsilon_lap", epsilon_lap},
        {"tabular_fallback", dyn::to_string(tabular_fallback)},
        {"holdout_size", holdout_size},
        {"ensemble",
         {{"n_members", e.n_members},
          {"n_elites", e.n_elites},
          {"hidden", e.hidden},
          {"activation", approx::to_string(e.activation)},
          {"adam", adam_json(e.adam)},
          {"log_sigma", bounds_json(e.log_sigma)},
          {"batch_size", e.batch_size},
          {"max_epochs", e.max_epochs},
          {"patience", e.patience},
          {"max_steps_per_epoch", e.max_steps_per_epoch},
          {"round_to_grid", e.round_to_grid}}}}},
      {"rollout",
       {{"policy", rollout::to_string(rollout_policy)},
        {"horizon", imagination.horizon},
        {"direction", dyn::to_string(imagination.direction)},
        {"n_rollouts", imagination.n_rollouts},
        {"start_mode", data::to_string(imagination.start_mode)},
        {"priority_temperature", imagination.priority_temperature},
        {"cvae",
         {{"hidden", cvae.hidden},
          {"latent_dim", cvae.latent_dim},
          {"z_clip", cvae.z_clip},
          {"adam", adam_json(cvae.adam)},
          {"log_sigma", bounds_json(cvae.log_sigma)},
          {"batch_size", cvae.batch_size},
          {"steps", cvae.steps}}},
        {"rbc",
         {{"hidden", rbc.hidden},
          {"adam", adam_json(rbc.adam)},
          {"log_sigma", bounds_json(rbc.log_sigma)},
          {"batch_size", rbc.batch_size},
          {"steps", rbc.steps}}}}},
      {"eta", eta},
      {"learner",
       {{"algo", learn::to_string(learner.algo)},
        {"bcq_threshold", learner.bcq_threshold},
        {"cql_alpha", learner.cql_alpha},
        {"gamma", learner.gamma},
        {"lr", learner.lr},
        {"batch_size", learner.batch_size},
        {"steps", learner.steps},
        {"unseen_value", learner.unseen_value},
        {"init_value", learner.init_value},
        {"tile", learner.tile}}},
      {"eval",
       {{"episodes", eval_episodes}, {"reference_episodes", reference_episodes}, {"reference_seed", reference_seed}}},
      {"seeds", seeds},
      {"jobs", jobs},
  };
}

RunConfig RunConfig::from_json(const json& j, const RunConfig& base) {
  json m = base.to_json();
  check_keys(j, m, "");
  m.merge_patch(j);
  RunConfig c;
  try {
    c.label = m.at("label");
    const auto& en = m.at("env");
    c.layout = en.at("layout");
    c.layout_file = en.at("layout_file");
    c.space = env::parse_space_kind(en.at("space").get<std::string>());
    c.reward_mode = env::parse_reward_mode(en.at("reward_mode").get<std::string>());
    c.episode_limit = en.at("episode_limit");
    const auto& d = m.at("data");
    c.dataset_size = d.at("size");
    c.dataset_path = d.at("path");
    const auto& p = d.at("planner");
    c.planner.switch_radius = p.at("switch_radius");
    c.planner.cruise_speed = p.at("cruise_speed");
    c.planner.velocity_gain = p.at("velocity_gain");
    c.planner.approach_gain = p.at("approach_gain");
    c.planner.action_noise = p.at("action_noise");
    c.planner.max_waypoint_draws = p.at("max_waypoint_draws");
    const auto& mo = m.at("model");
    c.model_kind = parse_model_kind(mo.at("kind").get<std::string>());
    c.epsilon_lap = mo.at("epsilon_lap");
    c.tabular_fallback = dyn::parse_tabular_fallback(mo.at("tabular_fallback").get<std::string>());
    c.holdout_size = mo.at("holdout_size");
    const auto& e = mo.at("ensemble");
    c.ensemble.n_members = e.at("n_members");
    c.ensemble.n_elites = e.at("n_elites");
    c.ensemble.hidden = e.at("hidden").get<std::vector<int>>();
    c.ensemble.activation = approx::parse_activation(e.at("activation").get<std::string>());
    c.ensemble.adam = adam_from(e.at("adam"));
    c.ensemble.log_sigma = bounds_from(e.at("log_sigma"));
    c.ensemble.batch_size = e.at("batch_size");
    c.ensemble.max_epochs = e.at("max_epochs");
    c.ensemble.patience = e.at("patience");
    c.ensemble.max_steps_per_epoch = e.at("max_steps_per_epoch");
    c.ensemble.round_to_grid = e.at("round_to_grid");
    const auto& r = m.at("rollout");
    c.rollout_policy = rollout::parse_policy_kind(r.at("policy").get<std::string>());
    c.imagination.horizon = r.at("horizon");
    c.imagination.direction = dyn::parse_direction(r.at("direction").get<std::string>());
    c.imagination.n_rollouts = r.at("n_rollouts");
    c.imagination.start_mode = data::parse_priority_mode(r.at("start_mode").get<std::string>());
    c.imagination.priority_temperature = r.at("priority_temperature");
    const auto& cv = r.at("cvae");
    c.cvae.hidden = cv.at("hidden").get<std::vector<int>>();
    c.cvae.latent_dim = cv.at("latent_dim");
    c.cvae.z_clip = cv.at("z_clip");
    c.cvae.adam = adam_from(cv.at("adam"));
    c.cvae.log_sigma = bounds_from(cv.at("log_sigma"));
    c.cvae.batch_size = cv.at("batch_size");
    c.cvae.steps = cv.at("steps");
    const auto& rb = r.at("rbc");
    c.rbc.hidden = rb.at("hidden").get<std::vector<int>>();
    c.rbc.adam = adam_from(rb.at("adam"));
    c.rbc.log_sigma = bounds_from(rb.at("log_sigma"));
    c.rbc.batch_size = rb.at("batch_size");
    c.rbc.steps = rb.at("steps");
    c.eta = m.at("eta");
    const auto& l = m.at("learner");
    c.learner.algo = learn::parse_algo(l.at("algo").get<std::string>());
    c.learner.bcq_threshold = l.at("bcq_threshold");
    c.learner.cql_alpha = l.at("cql_alpha");
    c.learner.gamma = l.at("gamma");
    c.learner.lr = l.at("lr");
    c.learner.batch_size = l.at("batch_size");
    c.learner.steps = l.at("steps");
    c.learner.unseen_value = l.at("unseen_value");
    c.learner.init_value = l.at("init_value");
    c.learner.tile = l.at("tile");
    const auto& ev = m.at("eval");
    c.eval_episodes = ev.at("episodes");
    c.reference_episodes = ev.at("reference_episodes");
    c.reference_seed = ev.at("reference_seed");
    c.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    c.jobs = m.at("jobs");
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("invalid config value: ") + ex.what());
  }
  return c;
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}); }

void RunConfig::validate() const {
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(!label.empty(), "label must be non-empty");
  need(label.find_first_of(",\n\"") == std::string::npos, "label must not contain commas, quotes or newlines");
  need(layout_file.empty() || fs::exists(layout_file), "layout file '" + layout_file + "' does not exist");
  need(dataset_path.empty() || fs::exists(dataset_path), "dataset file '" + dataset_path + "' does not exist");
  need(dataset_path.empty() ? dataset_size >= 1 : true, "dataset size must be >= 1");
  need(episode_limit >= 0, "episode_limit must be >= 0");
  need(model_kind == ModelKind::ensemble || space == env::SpaceKind::grid,
       "the tabular model needs a grid maze; use model.kind = ensemble for point mazes");
  need(epsilon_lap >= 0, "epsilon_lap must be >= 0");
  need(model_kind == ModelKind::tabular || holdout_size >= 1, "the ensemble needs holdout_size >= 1");
  need(dataset_path.empty() ? holdout_size < dataset_size : true, "holdout_size must be smaller than the dataset");
  need(ensemble.n_members >= 1 && ensemble.n_elites >= 1 && ensemble.n_elites <= ensemble.n_members,
       "ensemble needs 1 <= n_elites <= n_members");
  need(ensemble.batch_size >= 1 && ensemble.max_epochs >= 1 && ensemble.patience >= 1,
       "ensemble batch_size, max_epochs and patience must be >= 1");
  need(ensemble.adam.lr > 0 && cvae.adam.lr > 0 && rbc.adam.lr > 0, "learning rates must be > 0");
  need(cvae.steps >= 0 && rbc.steps >= 0 && cvae.batch_size >= 1 && rbc.batch_size >= 1,
       "rollout policy steps must be >= 0 and batch sizes >= 1");
  need(imagination.horizon >= 1, "rollout horizon must be >= 1");
  need(imagination.priority_temperature > 0, "priority_temperature must be > 0");
  need(eta >= 0 && eta <= 1, "eta must lie in [0, 1]");
  need(learner.gamma > 0 && learner.gamma < 1, "gamma must lie in (0, 1)");
  need(learner.lr > 0 && learner.batch_size >= 1 && learner.steps >= 0, "invalid learner lr, batch size or steps");
  need(learner.bcq_threshold >= 0 && learner.bcq_threshold <= 1, "bcq_threshold must lie in [0, 1]");
  need(learner.tile > 0, "learner tile must be > 0");
  need(eval_episodes >= 1 && reference_episodes >= 1, "eval and reference episodes must be >= 1");
  need(!seeds.empty(), "seeds must be non-empty");
  need(jobs >= 1, "jobs must be >= 1");
}

RunConfig RunConfig::resolved() const {
  RunConfig c = *this;
  if (c.episode_limit == 0) c.episode_limit = make_spec(*this).episode_limit;
  c.learner.unseen_value = learner.resolved_unseen_value();
  c.ensemble.round_to_grid = space == env::SpaceKind::grid;
  return c;
}

std::string RunConfig::data_key() const {
  const json j = to_json();
  return json{{"env", j.at("env")}, {"data", j.at("data")}}.dump();
}

std::string RunConfig::model_key() const {
  const json j = to_json();
  return json{{"env", j.at("env")}, {"data", j.at("data")}, {"model", j.at("model")}}.dump();
}

env::MazeSpec make_spec(const RunConfig& cfg) {
  env::MazeSpec spec;
  if (!cfg.layout_file.empty()) {
    const int limit = cfg.episode_limit > 0 ? cfg.episode_limit : 100;
    spec = env::load_layout_file(cfg.layout_file, cfg.space, cfg.reward_mode, limit);
  } else {
    spec = env::builtin_layout(cfg.layout, cfg.space, cfg.reward_mode);
    if (cfg.episode_limit > 0) spec.episode_limit = cfg.episode_limit;
  }
  env::validate(spec);
  return spec;
}

data::TransitionBuffer stage_dataset(const RunConfig& cfg, const env::MazeSpec& spec, std::uint64_t seed) {
  if (!cfg.dataset_path.empty()) {
    auto buf = data::read_buffer(cfg.dataset_path);
    if (buf.layout_id != spec.layout_id || buf.state_dim != spec.state_dim())
      throw ConfigError("dataset '" + cfg.dataset_path + "' was generated for layout '" + buf.layout_id + "'");
    return buf;
  }
  Rng rng = make_rng(seed, "data");
  return env::generate_behavior_dataset(spec, cfg.dataset_size, cfg.planner, rng);
}

ModelPair stage_models(const RunConfig& cfg, const env::MazeSpec& spec, const data::TransitionBuffer& dataset,
                       std::uint64_t seed) {
  Rng split_rng = make_rng(seed, "model/split");
  const std::size_t n_hold = std::min(cfg.holdout_size, dataset.size() > 1 ? dataset.size() - 1 : 0);
  auto split = data::split_holdout(dataset, n_hold, split_rng);
  if (n_hold == 0) split.train = dataset;
  ModelPair mp;
  if (cfg.model_kind == ModelKind::tabular) {
    for (auto d : {dyn::Direction::forward, dyn::Direction::reverse}) {
      auto m = std::make_shared<dyn::TabularModel>(
          dyn::fit_tabular(split.train, {d, cfg.epsilon_lap, cfg.tabular_fallback}));
      (d == dyn::Direction::forward ? mp.forward : mp.reverse) = m;
    }
  } else {
    for (auto d : {dyn::Direction::forward, dyn::Direction::reverse}) {
      dyn::EnsembleConfig ec = cfg.ensemble;
      ec.direction = d;
      ec.round_to_grid = spec.space == env::SpaceKind::grid;
      Rng rng = make_rng(seed, d == dyn::Direction::forward ? "model/forward" : "model/reverse");
      auto m = std::make_shared<dyn::GaussianEnsemble>(dyn::fit_gaussian_ensemble(split.train, split.holdout, ec, rng));
      (d == dyn::Direction::forward ? mp.forward : mp.reverse) = m;
    }
  }
  if (!split.holdout.empty()) {
    mp.error = dyn::evaluate_model_error(*mp.forward, *mp.reverse, split.holdout);
  }
  mp.error.dataset_type = env::to_string(spec.reward_mode);
  mp.error.environment = spec.layout_id + "-" + env::to_string(spec.space);
  mp.error.seed = seed;
  return mp;
}

std::unique_ptr<rollout::RolloutPolicy> stage_rollout_policy(const RunConfig& cfg, const env::MazeSpec& spec,
                                                             const data::TransitionBuffer& dataset,
                                                             std::uint64_t seed) {
  const auto space = rollout::ActionSpace::of(spec);
  const auto dir = cfg.imagination.direction;
  Rng rng = make_rng(seed, "rollout/policy");
  switch (cfg.rollout_policy) {
    case rollout::PolicyKind::uniform: return std::make_unique<rollout::UniformPolicy>(space);
    case rollout::PolicyKind::empirical:
      return std::make_unique<rollout::EmpiricalPolicy>(dataset, dir, spec.space == env::SpaceKind::grid);
    case rollout::PolicyKind::cvae:
      return std::make_unique<rollout::CvaePolicy>(rollout::train_cvae_policy(dataset, dir, space, cfg.cvae, rng));
    case rollout::PolicyKind::rbc:
      return std::make_unique<rollout::RbcPolicy>(rollout::train_rbc_policy(dataset, dir, space, cfg.rbc, rng));
  }
  throw ConfigError("unknown rollout policy kind");
}

namespace {

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg_in, std::uint64_t seed, const PipelineInputs& inputs) {
  cfg_in.validate();
  const RunConfig cfg = cfg_in.resolved();
  const auto spec = make_spec(cfg);
  PipelineResult r;
  r.seed = seed;
  r.dataset = inputs.dataset ? *inputs.dataset : in_stage("gen-data", [&] { return stage_dataset(cfg, spec, seed); });
  r.dataset_checksum = data::buffer_checksum(r.dataset);
  r.models = inputs.models ? inputs.models : in_stage("fit-model", [&] {
    return std::make_shared<const ModelPair>(stage_models(cfg, spec, r.dataset, seed));
  });
  r.policy = in_stage("rollout-policy", [&] { return stage_rollout_policy(cfg, spec, r.dataset, seed); });
  r.imagination = in_stage("imagine", [&] {
    return rollout::imagine(r.models->get(cfg.imagination.direction), *r.policy, r.dataset, cfg.imagination, spec,
                            derive_seed(seed, "rollout"), 1);
  });
  r.q = in_stage("train", [&] {
    Rng rng = make_rng(seed, "learner");
    return learn::train_policy(r.dataset, r.imagination.buffer, cfg.eta, cfg.learner, spec, rng, &r.train_stats);
  });
  in_stage("eval", [&] {
    r.reference = inputs.reference ? *inputs.reference
                                   : compute_reference(spec, cfg.reference_episodes, cfg.reference_seed);
    Rng rng = make_rng(seed, "eval");
    r.episodes = run_episodes(spec, r.q, cfg.learner, cfg.eval_episodes, rng);
    const DiscrepancyIndex index(r.dataset, spec.space == env::SpaceKind::point);
    r.report = summarize(cfg.label, seed, r.episodes, index, r.reference);
    return 0;
  });
  return r;
}

namespace {

std::string episodes_csv(const PipelineResult& r, const DiscrepancyIndex& index) {
  std::ostringstream o;
  o << "episode,return,length,collided,success,atd\n";
  char buf[160];
  for (std::size_t i = 0; i < r.episodes.size(); ++i) {
    const auto& t = r.episodes[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%d,%d,%.17g\n", i, t.ret, t.actions.size(), t.collided ? 1 : 0,
                  t.success ? 1 : 0, index.atd(t.states));
    o << buf;
  }
  return o.str();
}

}  // namespace

void write_pipeline_artifacts(const std::string& dir, const RunConfig& cfg_in, const PipelineResult& r) {
  const RunConfig cfg = cfg_in.resolved();
  const auto spec = make_spec(cfg);
  fs::create_directories(dir);
  const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  RunConfig seed_cfg = cfg;
  seed_cfg.seeds = {r.seed};
  const std::string config_text = seed_cfg.to_json().dump(2) + "\n";
  write_text_file(path("resolved_config.json"), config_text);

  data::write_buffer(path("dataset.bin"), r.dataset);
  data::write_buffer(path("imagined.bin"), r.imagination.buffer);
  save_model(path("model_forward.bin"), *r.models->forward);
  save_model(path("model_reverse.bin"), *r.models->reverse);
  if (const auto* p = dynamic_cast<const rollout::CvaePolicy*>(r.policy.get())) p->save(path("rollout_policy.bin"));
  if (const auto* p = dynamic_cast<const rollout::RbcPolicy*>(r.policy.get())) p->save(path("rollout_policy.bin"));
  write_text_file(path("model_error.csv"), dyn::model_error_csv({r.models->error}));
  write_text_file(path("rollout_report.json"), r.imagination.report.to_json().dump(2) + "\n");
  learn::save_qtable(path("qtable.json"), r.q);

  const DiscrepancyIndex index(r.dataset, spec.space == env::SpaceKind::point);
  write_text_file(path("episodes.csv"), episodes_csv(r, index));
  write_text_file(path("eval.csv"), eval_csv_header() + "\n" + eval_csv_row(r.report, "seed") + "\n");
  write_text_file(path("trajectories.svg"), trajectories_svg(spec, r.dataset, r.episodes));
  write_text_file(path("nn_distance.svg"), nn_distance_heatmap_svg(spec, index));

  std::size_t collisions = 0;
  for (const auto& t : r.dataset.transitions) collisions += t.collided ? 1 : 0;
  json artifacts = json::object();
  for (const char* name : {"dataset.bin", "imagined.bin", "model_forward.bin", "model_reverse.bin", "model_error.csv",
                           "rollout_report.json", "qtable.json", "episodes.csv", "eval.csv"})
    artifacts[name] = content_hash(read_file_bytes(path(name)));
  const json manifest = {
      {"kind", "pipeline_run"},
      {"seed", r.seed},
      {"label", cfg.label},
      {"streams",
       {{"data", derive_seed(r.seed, "data")},
        {"model", derive_seed(r.seed, "model/split")},
        {"rollout", derive_seed(r.seed, "rollout")},
        {"learner", derive_seed(r.seed, "learner")},
        {"eval", derive_seed(r.seed, "eval")}}},
      {"inputs_hash", content_hash(config_text + r.dataset_checksum)},
      {"dataset",
       {{"checksum", r.dataset_checksum},
        {"transitions", r.dataset.size()},
        {"episodes", r.dataset.episodes().size()},
        {"collisions", collisions}}},
      {"imagined", {{"checksum", data::buffer_checksum(r.imagination.buffer)}, {"transitions", r.imagination.buffer.size()}}},
      {"train", {{"steps", r.train_stats.steps}, {"updates", r.train_stats.updates},
                 {"bcq_fallbacks", r.train_stats.bcq_fallbacks}, {"final_mean_abs_td", r.train_stats.final_mean_abs_td}}},
      {"reference", {{"key", ScoreReference::key_for(spec)}, {"ref_min", r.reference.ref_min}, {"ref_max", r.reference.ref_max}}},
      {"artifacts", artifacts},
  };
  write_text_file(path("manifest.json"), manifest.dump(2) + "\n");
}

std::vector<EvalReport> run_pipeline_dir(const RunConfig& cfg_in, const std::string& out_dir) {
  cfg_in.validate();
  const RunConfig cfg = cfg_in.resolved();
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "resolved_config.json").string(), cfg.to_json().dump(2) + "\n");
  const auto spec = make_spec(cfg);
  const RefEntry ref = in_stage("eval", [&] { return compute_reference(spec, cfg.reference_episodes, cfg.reference_seed); });
  std::vector<EvalReport> reports(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const auto seed = cfg.seeds[i];
    PipelineInputs in;
    in.reference = &ref;
    auto r = run_pipeline(cfg, seed, in);
    write_pipeline_artifacts((fs::path(out_dir) / ("seed_" + std::to_string(seed))).string(), cfg, r);
    reports[i] = r.report;
  });
  std::ostringstream csv;
  csv << eval_csv_header() << "\n";
  for (const auto& r : reports) csv << eval_csv_row(r, "seed") << "\n";
  csv << eval_csv_row(aggregate(cfg.label, reports), "aggregate") << "\n";
  write_text_file((fs::path(out_dir) / "eval.csv").string(), csv.str());
  return reports;
}

std::shared_ptr<const dyn::DynamicsModel> load_model(const std::string& path) {
  const auto kind = read_container(path).header.value("kind", "");
  if (kind == "tabular_model") return std::make_shared<dyn::TabularModel>(dyn::load_tabular(path));
  if (kind == "mlp") return std::make_shared<dyn::GaussianEnsemble>(dyn::GaussianEnsemble::load(path));
  throw IoError(path + ": not a dynamics model checkpoint (kind '" + kind + "')");
}

void save_model(const std::string& path, const dyn::DynamicsModel& model) {
  if (const auto* t = dynamic_cast<const dyn::TabularModel*>(&model)) return dyn::save_tabular(path, *t);
  if (const auto* e = dynamic_cast<const dyn::GaussianEnsemble*>(&model)) return e->save(path);
  throw PreconditionError("unsupported dynamics model type");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace romilab::eval
