#include "romilab/evalharness/ablation.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <map>
#include <sstream>

#include "romilab/core/container.h"
#include "romilab/dataset/io.h"
#include "romilab/evalharness/svg.h"

namespace romilab::eval {

namespace fs = std::filesystem;

std::size_t AblationResult::failures() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.ok ? 0 : 1;
  return n;
}

AblationResult run_ablation_grid(const std::vector<RunConfig>& arms_in, const std::vector<std::uint64_t>& seeds,
                                 const AblationOptions& opt) {
  if (arms_in.empty()) throw ConfigError("an ablation grid needs at least one arm");
  if (seeds.empty()) throw ConfigError("an ablation grid needs at least one seed");
  std::vector<RunConfig> arms;
  for (const auto& a : arms_in) {
    a.validate();
    arms.push_back(a.resolved());
  }
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i].data_key() != arms[0].data_key())
      throw ConfigError("arm '" + arms[i].label + "' changes env or data settings; arms must share D_env");
    for (std::size_t j = 0; j < i; ++j)
      if (arms[j].label == arms[i].label) throw ConfigError("duplicate arm label '" + arms[i].label + "'");
  }
  const auto spec = make_spec(arms[0]);

  AblationResult res;
  res.seeds = seeds;
  res.environment = env::to_string(spec.reward_mode) + "-" + spec.layout_id +
                    (spec.space == env::SpaceKind::point ? "-point" : "");
  for (const auto& a : arms) res.arms.push_back(a.label);
  for (std::size_t i = 0; i < arms.size() && res.base_arm < 0; ++i)
    if (arms[i].label == opt.base_label) res.base_arm = static_cast<int>(i);
  for (std::size_t i = 0; i < arms.size() && res.base_arm < 0; ++i)
    if (arms[i].eta == 0.0) res.base_arm = static_cast<int>(i);

  const RefEntry ref = compute_reference(spec, arms[0].reference_episodes, arms[0].reference_seed);

  // Shared D_env per seed.
  std::vector<data::TransitionBuffer> datasets(seeds.size());
  std::vector<std::string> data_error(seeds.size());
  parallel_for(seeds.size(), opt.jobs, [&](std::size_t s) {
    try {
      datasets[s] = stage_dataset(arms[0], spec, seeds[s]);
    } catch (const std::exception& e) {
      data_error[s] = std::string("gen-data: ") + e.what();
    }
  });

  // Shared models per (seed, model settings).
  std::vector<std::string> model_keys;
  std::vector<std::size_t> arm_model(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const auto k = arms[i].model_key();
    auto it = std::find(model_keys.begin(), model_keys.end(), k);
    if (it == model_keys.end()) it = model_keys.insert(model_keys.end(), k);
    arm_model[i] = static_cast<std::size_t>(it - model_keys.begin());
  }
  std::vector<std::size_t> model_owner(model_keys.size());
  for (std::size_t i = arms.size(); i-- > 0;) model_owner[arm_model[i]] = i;
  const std::size_t n_models = model_keys.size() * seeds.size();
  std::vector<std::shared_ptr<const ModelPair>> models(n_models);
  std::vector<std::string> model_error(n_models);
  parallel_for(n_models, opt.jobs, [&](std::size_t i) {
    const std::size_t m = i / seeds.size(), s = i % seeds.size();
    if (!data_error[s].empty()) return;
    try {
      models[i] = std::make_shared<const ModelPair>(stage_models(arms[model_owner[m]], spec, datasets[s], seeds[s]));
    } catch (const std::exception& e) {
      model_error[i] = std::string("fit-model: ") + e.what();
    }
  });
  for (std::size_t i = 0; i < n_models; ++i)
    if (models[i] && models[i]->error.forward.evaluated > 0) res.model_errors.push_back(models[i]->error);

  res.cells.resize(arms.size() * seeds.size());
  parallel_for(res.cells.size(), opt.jobs, [&](std::size_t i) {
    const std::size_t a = i / seeds.size(), s = i % seeds.size();
    auto& cell = res.cells[i];
    cell.arm = arms[a].label;
    cell.seed = seeds[s];
    const std::size_t mi = arm_model[a] * seeds.size() + s;
    if (!data_error[s].empty()) {
      cell.error = data_error[s];
      return;
    }
    if (!model_error[mi].empty()) {
      cell.error = model_error[mi];
      return;
    }
    try {
      PipelineInputs in;
      in.dataset = &datasets[s];
      in.models = models[mi];
      in.reference = &ref;
      auto r = run_pipeline(arms[a], seeds[s], in);
      cell.dataset_checksum = r.dataset_checksum;
      cell.report = r.report;
      const std::size_t keep = std::min(opt.sample_episodes, r.episodes.size());
      cell.sample_episodes.assign(r.episodes.begin(), r.episodes.begin() + static_cast<std::ptrdiff_t>(keep));
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    std::string first;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const auto& c = res.cell(a, s);
      if (!c.ok) continue;
      if (first.empty()) first = c.dataset_checksum;
      if (c.dataset_checksum != first) res.checksums_consistent = false;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    std::vector<EvalReport> ok;
    for (std::size_t s = 0; s < seeds.size(); ++s)
      if (res.cell(a, s).ok) ok.push_back(res.cell(a, s).report);
    res.aggregates.push_back(aggregate(arms[a].label, ok));
    if (!ok.empty() && res.aggregates.back().normalized_score.mean > best) {
      best = res.aggregates.back().normalized_score.mean;
      res.best_arm = static_cast<int>(a);
    }
  }
  return res;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string AblationResult::csv() const {
  std::ostringstream o;
  o << eval_csv_header() << ",delta_normalized_score,best,ok,dataset_checksum,error\n";
  for (std::size_t a = 0; a < arms.size(); ++a)
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& c = cell(a, s);
      EvalReport r = c.report;
      r.arm = c.arm;
      r.seeds = {c.seed};
      std::string delta;
      if (base_arm >= 0 && c.ok && cell(static_cast<std::size_t>(base_arm), s).ok)
        delta = g17(r.normalized_score.mean - cell(static_cast<std::size_t>(base_arm), s).report.normalized_score.mean);
      std::string err = c.error;
      for (auto& ch : err)
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      o << eval_csv_row(r, "seed") << "," << delta << ",," << (c.ok ? 1 : 0) << "," << c.dataset_checksum << ","
        << err << "\n";
    }
  for (std::size_t a = 0; a < arms.size(); ++a) {
    std::string delta;
    if (base_arm >= 0)
      delta = g17(aggregates[a].normalized_score.mean -
                  aggregates[static_cast<std::size_t>(base_arm)].normalized_score.mean);
    std::size_t ok = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) ok += cell(a, s).ok ? 1 : 0;
    o << eval_csv_row(aggregates[a], "aggregate") << "," << delta << "," << (static_cast<int>(a) == best_arm ? 1 : 0)
      << "," << ok << ",,\n";
  }
  return o.str();
}

std::string AblationResult::markdown() const {
  std::ostringstream o;
  o << "| Arm | Normalized score | Success rate | Collision rate | ATD | Delta |\n";
  o << "|---|---|---|---|---|---|\n";
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& r = aggregates[a];
    const bool best = static_cast<int>(a) == best_arm;
    char buf[64];
    std::string delta = "-";
    if (base_arm >= 0 && static_cast<int>(a) != base_arm) {
      std::snprintf(buf, sizeof buf, "%+.1f",
                    r.normalized_score.mean - aggregates[static_cast<std::size_t>(base_arm)].normalized_score.mean);
      delta = buf;
    }
    const std::string score = format_mean_std(r.normalized_score, 1);
    o << "| " << arms[a] << " | " << (best ? "**" + score + "**" : score) << " | ";
    std::snprintf(buf, sizeof buf, "%.3f | %.3f", r.success_rate, r.collision_rate);
    o << buf << " | " << format_mean_std(r.atd, 3) << " | " << delta << " |\n";
  }
  if (failures() > 0) o << "\n" << failures() << " failed cell(s); see grid.csv.\n";
  return o.str();
}

std::string AblationResult::sweep_csv() const {
  std::ostringstream o;
  o << "dataset";
  for (const auto& a : arms) o << "," << a;
  o << "\n" << environment;
  for (const auto& r : aggregates) o << "," << format_mean_std(r.normalized_score, 1);
  o << "\n";
  return o.str();
}

void write_ablation_report(const std::string& dir, const AblationResult& r, const std::vector<RunConfig>& arms) {
  fs::create_directories(dir);
  const auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  write_text_file(path("grid.csv"), r.csv());
  write_text_file(path("grid.md"), r.markdown());
  write_text_file(path("sweep.csv"), r.sweep_csv());
  write_text_file(path("model_error.csv"), dyn::model_error_csv(r.model_errors));
  write_text_file(path("model_error_table.csv"), dyn::model_error_table(r.model_errors));
  nlohmann::json cfgs = nlohmann::json::array();
  for (const auto& a : arms) cfgs.push_back(a.resolved().to_json());
  write_text_file(path("resolved_arms.json"), cfgs.dump(2) + "\n");

  std::vector<double> atd_m, atd_s;
  std::vector<std::vector<std::string>> rows;
  for (const auto& a : r.aggregates) {
    atd_m.push_back(a.atd.mean);
    atd_s.push_back(a.atd.std);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", a.success_rate);
    std::string succ = buf;
    std::snprintf(buf, sizeof buf, "%.3f", a.collision_rate);
    rows.push_back({a.arm, format_mean_std(a.normalized_score, 1), succ, buf});
  }
  write_text_file(path("atd.svg"), bar_chart_svg("Average trajectory discrepancy", r.arms, atd_m, atd_s));
  write_text_file(path("scores.svg"),
                  table_svg("Normalized score (" + r.environment + ")", {"arm", "score", "success", "collision"}, rows,
                            r.best_arm));
  if (!arms.empty()) {
    const auto spec = make_spec(arms[0].resolved());
    for (std::size_t a = 0; a < r.arms.size(); ++a)
      for (std::size_t s = 0; s < r.seeds.size(); ++s) {
        const auto& c = r.cell(a, s);
        if (!c.ok) continue;
        // Dataset points are omitted here; the per-arm plots overlay policies only.
        data::TransitionBuffer none;
        write_text_file(path("trajectories_" + r.arms[a] + ".svg"), trajectories_svg(spec, none, c.sample_episodes));
        break;
      }
  }
}

namespace {

double metric(const AblationResult& r, const std::string& ref) {
  const auto dot = ref.rfind('.');
  if (dot == std::string::npos) throw ConfigError("assertion operand '" + ref + "' must be <arm>.<metric>");
  const std::string arm = ref.substr(0, dot), m = ref.substr(dot + 1);
  const auto it = std::find(r.arms.begin(), r.arms.end(), arm);
  if (it == r.arms.end()) throw ConfigError("assertion names unknown arm '" + arm + "'");
  const auto& a = r.aggregates[static_cast<std::size_t>(it - r.arms.begin())];
  if (m == "success_rate") return a.success_rate;
  if (m == "collision_rate") return a.collision_rate;
  if (m == "normalized_score") return a.normalized_score.mean;
  if (m == "raw_return") return a.raw_return.mean;
  if (m == "atd") return a.atd.mean;
  throw ConfigError("assertion names unknown metric '" + m + "'");
}

}  // namespace

std::vector<AssertionOutcome> evaluate_assertions(const AblationResult& r, const nlohmann::json& block) {
  std::vector<AssertionOutcome> out;
  if (block.is_null()) return out;
  if (!block.is_array()) throw ConfigError("the assert block must be a list");
  for (const auto& e : block) {
    if (!e.is_object() || !e.contains("lhs") || !e.contains("op") || !e.contains("rhs"))
      throw ConfigError("assertion entries need lhs, op and rhs");
    for (const auto& [k, _] : e.items())
      if (k != "lhs" && k != "op" && k != "rhs" && k != "margin")
        throw ConfigError("unknown assertion key '" + k + "'");
    AssertionOutcome a;
    const std::string lhs = e.at("lhs").get<std::string>(), op = e.at("op").get<std::string>();
    const double margin = e.value("margin", 0.0);
    a.lhs = metric(r, lhs);
    std::string rhs_text;
    if (e.at("rhs").is_number()) {
      a.rhs = e.at("rhs").get<double>();
      rhs_text = g17(a.rhs);
    } else {
      rhs_text = e.at("rhs").get<std::string>();
      a.rhs = metric(r, rhs_text);
    }
    const double bound = a.rhs + margin;
    if (op == ">") a.pass = a.lhs > bound;
    else if (op == ">=") a.pass = a.lhs >= bound;
    else if (op == "<") a.pass = a.lhs < bound;
    else if (op == "<=") a.pass = a.lhs <= bound;
    else if (op == "==") a.pass = a.lhs == bound;
    else throw ConfigError("unknown assertion operator '" + op + "'");
    char buf[96];
    std::snprintf(buf, sizeof buf, " (%.6g vs %.6g)", a.lhs, bound);
    char mbuf[32];
    std::snprintf(mbuf, sizeof mbuf, " + %g", margin);
    a.text = lhs + " " + op + " " + rhs_text + (margin != 0 ? mbuf : "") + buf;
    out.push_back(a);
  }
  return out;
}

}  // namespace romilab::eval
