// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.h"
#include "romilab/approx/gaussian.h"
#include "romilab/approx/mlp.h"
#include "romilab/core/container.h"
#include "romilab/dynamics/model_error.h"
#include "romilab/dynamics/tabular.h"
#include "romilab/env/maze.h"
#include "romilab/env/planner.h"
#include "romilab/evalharness/ablation.h"
#include "romilab/evalharness/appendix_a.h"
#include "romilab/evalharness/metrics.h"
#include "romilab/evalharness/pipeline.h"
#include "romilab/evalharness/presets.h"
#include "romilab/rollout/imagine.h"
#include "romilab/rollout/policy.h"

namespace fs = std::filesystem;
using namespace romilab;
using approx::Activation;
using approx::Mat;
using approx::Mlp;
using approx::Vec;
using data::Transition;
using data::TransitionBuffer;
using romilab::testing::gradcheck;
using romilab::testing::random_mat;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TransitionBuffer grid_buffer() {
  TransitionBuffer b;
  b.state_dim = 2;
  b.action_dim = 1;
  return b;
}

State S(int i) { return State::cell(i, 0); }

TransitionBuffer random_buffer(Rng& rng, int n_states, int n_actions, int n) {
  auto b = grid_buffer();
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.s = S(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_states))));
    t.a = Action::discrete(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_actions))));
    t.s_next = S(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_states))));
    t.r = t.s.row() + 10.0 * t.a.index;
    b.push(t);
  }
  return b;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ROMILAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  std::size_t checked = 0, failed = 0;
  double worst = 0;
  auto add = [&](const romilab::testing::GradCheck& r) {
    checked += r.checked;
    failed += r.failed;
    worst = std::max(worst, r.worst);
  };
  for (std::uint64_t k = 0; k < 20; ++k) {
    // Gaussian NLL through a model-sized network.
    Rng rng(1000 + k);
    Mlp net({6, 16, 16, 8}, {Activation::swish, Activation::swish, Activation::linear}, rng);
    Mat x = random_mat(6, 8, rng), tgt = random_mat(4, 8, rng);
    approx::Tape t;
    Mat d_raw;
    approx::gaussian_nll_grad(approx::make_head(net.forward(x, t)), tgt, 1.0, d_raw);
    Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
    net.backward(t, d_raw, g);
    add(gradcheck(net.params(), g, [&] { return approx::gaussian_nll(approx::make_head(net.forward(x)), tgt); }));
  }
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng rng(2000 + k);
    rollout::CvaeNets n;
    n.latent_dim = 4;
    n.encoder = Mlp({4 + 2, 12, 12, 8}, {Activation::relu, Activation::relu, Activation::linear}, rng);
    n.decoder = Mlp({4 + 4, 12, 12, 2}, {Activation::relu, Activation::relu, Activation::linear}, rng);
    Mat cond = random_mat(4, 8, rng), acts = random_mat(2, 8, rng, 0.5), eps = random_mat(4, 8, rng);
    Vec ge = Vec::Zero(static_cast<Eigen::Index>(n.encoder.param_count()));
    Vec gd = Vec::Zero(static_cast<Eigen::Index>(n.decoder.param_count()));
    rollout::cvae_loss(n, cond, acts, eps, {}, 1.0, &ge, &gd);
    auto loss = [&] { return rollout::cvae_loss(n, cond, acts, eps, {}).total(); };
    add(gradcheck(n.encoder.params(), ge, loss));
    add(gradcheck(n.decoder.params(), gd, loss));
  }
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng rng(3000 + k);
    Mlp net({4, 12, 12, 4}, {Activation::relu, Activation::relu, Activation::linear}, rng);
    Mat cond = random_mat(4, 8, rng), acts = random_mat(2, 8, rng, 0.5);
    Vec g = Vec::Zero(static_cast<Eigen::Index>(net.param_count()));
    rollout::rbc_loss(net, cond, acts, {}, 1.0, &g);
    add(gradcheck(net.params(), g, [&] { return rollout::rbc_loss(net, cond, acts, {}); }));
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 60.0, std::to_string(checked) + " partials over 60 parameterizations, " +
                                          std::to_string(failed) + " above 1e-4, worst " + fmt("%.2e", worst) +
                                          ", " + fmt("%.1f", secs) + " s"};
}

Verdict tabular_mle() {
  Rng rng(77);
  std::size_t mismatches = 0, rows = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto b = random_buffer(rng, 5, 3, 1 + static_cast<int>(uniform_index(rng, 50)));
    auto m = dyn::fit_tabular_reverse(b, 0.0);
    std::map<std::pair<State, int>, std::map<State, int>> brute;
    for (const auto& t : b.transitions) ++brute[{t.s_next, t.a.index}][t.s];
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 3; ++a) {
        const auto d = m.distribution(S(s), Action::discrete(a));
        const auto it = brute.find({S(s), a});
        if (it == brute.end()) {
          if (d) ++mismatches;
          continue;
        }
        ++rows;
        int total = 0;
        for (auto [_, c] : it->second) total += c;
        if (!d || d->size() != it->second.size()) {
          ++mismatches;
          continue;
        }
        for (const auto& [state, p] : *d) {
          const auto c = it->second.find(state);
          if (c == it->second.end() || p != static_cast<double>(c->second) / total) ++mismatches;
        }
      }
  }
  return {mismatches == 0, std::to_string(rows) + " (s', a) rows over 100 buffers, " + std::to_string(mismatches) +
                               " mismatches"};
}

// Per-depth emission probabilities of reverse imagination with a uniform
// action policy over the empirical reverse model.
using Emission = std::tuple<State, int, State>;  // (s, a, s_next)
std::vector<std::map<Emission, double>> enumerate_reverse(const dyn::TabularModel& m, const TransitionBuffer& b,
                                                          const std::vector<double>& weights, int n_actions, int h) {
  std::map<State, double> frontier;
  for (std::size_t i = 0; i < b.size(); ++i) frontier[b[i].s_next] += weights[i];
  std::vector<std::map<Emission, double>> out(static_cast<std::size_t>(h));
  for (int depth = 0; depth < h; ++depth) {
    std::map<State, double> next;
    for (const auto& [cur, pc] : frontier)
      for (int a = 0; a < n_actions; ++a) {
        const auto d = m.distribution(cur, Action::discrete(a));
        if (!d) continue;  // truncated
        for (const auto& [s, p] : *d) {
          const double w = pc * p / n_actions;
          out[static_cast<std::size_t>(depth)][{s, a, cur}] += w;
          next[s] += w;
        }
      }
    frontier = std::move(next);
  }
  return out;
}

Verdict imagination_enumeration() {
  const auto t0 = Clock::now();
  auto spec = env::parse_layout(".....\n.....\n.....\n.....\n....G\n", "oracle");
  Rng rng(4242);
  constexpr std::size_t kRollouts = 10000;
  std::size_t checks = 0, exact = 0, violations = 0;
  double worst_z = 0;
  for (int mdp = 0; mdp < 14; ++mdp) {
    int na = 1;
    TransitionBuffer b = grid_buffer();
    std::vector<double> w;
    if (mdp < 10) {
      const int ns = 2 + static_cast<int>(uniform_index(rng, 4));
      na = 1 + static_cast<int>(uniform_index(rng, 3));
      b = random_buffer(rng, ns, na, 3 + static_cast<int>(uniform_index(rng, 12)));
      w.assign(b.size(), 1.0 / static_cast<double>(b.size()));
    } else {
      // Deterministic chain 0 -> 1 -> ... -> len launched from its end:
      // every emission has probability 0 or 1, and chains shorter than h
      // truncate at their first state.
      const int len = mdp - 9;
      for (int i = 0; i < len; ++i) {
        Transition t;
        t.s = S(i);
        t.s_next = S(i + 1);
        t.a = Action::discrete(0);
        b.push(t);
      }
      w.assign(b.size(), 0.0);
      w.back() = 1.0;
    }
    const auto m = dyn::fit_tabular_reverse(b, 0.0);
    rollout::ActionSpace space;
    space.n_actions = na;
    rollout::UniformPolicy pol(space);
    for (int h = 1; h <= 3; ++h) {
      rollout::ImaginationConfig cfg;
      cfg.horizon = h;
      cfg.n_rollouts = kRollouts;
      const auto r = rollout::imagine(m, pol, b, w, cfg, spec, 900 + static_cast<std::uint64_t>(mdp * 10 + h));
      std::vector<std::map<Emission, double>> seen(static_cast<std::size_t>(h));
      for (auto [beg, end] : r.buffer.episodes())
        for (std::size_t i = beg; i < end; ++i) {
          const auto& t = r.buffer[i];
          seen[i - beg][{t.s, t.a.index, t.s_next}] += 1.0;
        }
      const auto want = enumerate_reverse(m, b, w, na, h);
      for (int d = 0; d < h; ++d) {
        std::set<Emission> keys;
        for (const auto& [k, _] : want[static_cast<std::size_t>(d)]) keys.insert(k);
        for (const auto& [k, _] : seen[static_cast<std::size_t>(d)]) keys.insert(k);
        for (const auto& k : keys) {
          const double p = want[static_cast<std::size_t>(d)].count(k) ? want[static_cast<std::size_t>(d)].at(k) : 0.0;
          const double c = seen[static_cast<std::size_t>(d)].count(k) ? seen[static_cast<std::size_t>(d)].at(k) : 0.0;
          const double n = static_cast<double>(kRollouts);
          ++checks;
          if (p == 0.0 || p == 1.0) {
            ++exact;
            if (c != p * n) ++violations;
            continue;
          }
          const double sigma = std::sqrt(n * p * (1 - p));
          const double z = std::abs(c - n * p) / sigma;
          worst_z = std::max(worst_z, z);
          if (z > 3.0) ++violations;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 60.0,
          std::to_string(checks) + " (depth, transition) cells over 14 MDPs x h in {1,2,3}, " +
              std::to_string(exact) + " exact, worst |z| " + fmt("%.2f", worst_z) + ", " +
              std::to_string(violations) + " violations, " + fmt("%.1f", secs) + " s"};
}

Verdict anchor_invariants() {
  auto spec = env::builtin_layout("umaze");
  Rng rng(5);
  const auto data = env::generate_behavior_dataset(spec, 50000, {}, rng);
  std::set<State> states;
  for (const auto& t : data.transitions) states.insert(t.s), states.insert(t.s_next);
  std::ostringstream detail;
  bool pass = true;
  for (auto dir : {dyn::Direction::reverse, dyn::Direction::forward}) {
    const auto m = dyn::fit_tabular(data, {dir, 0.0, dyn::TabularFallback::displacement});
    rollout::UniformPolicy pol(rollout::ActionSpace::of(spec));
    rollout::ImaginationConfig cfg;
    cfg.horizon = 5;
    cfg.direction = dir;
    std::size_t transitions = 0, trajectories = 0, bad = 0;
    for (std::uint64_t round = 0; transitions < 100000; ++round) {
      cfg.n_rollouts = 25000;
      const auto r = rollout::imagine(m, pol, data, cfg, spec, 31 + round);
      transitions += r.buffer.size();
      for (auto [b, e] : r.buffer.episodes()) {
        ++trajectories;
        const State& anchor = dir == dyn::Direction::reverse ? r.buffer[b].s_next : r.buffer[b].s;
        if (!states.count(anchor)) ++bad;
      }
    }
    pass = pass && bad == 0;
    detail << dyn::to_string(dir) << ": " << transitions << " transitions, " << trajectories << " trajectories, "
           << bad << " off-data anchors; ";
  }
  return {pass, detail.str()};
}

struct CaseStudy {
  eval::AblationResult grid;
  std::vector<eval::AssertionOutcome> outcomes;
  double seconds = 0;
  std::string error;
};

CaseStudy run_case_study() {
  CaseStudy cs;
  const auto t0 = Clock::now();
  try {
    const auto plan = eval::preset("paper-maze-ablation");
    cs.grid = eval::run_ablation_grid(plan.arms, plan.seeds);
    cs.outcomes = eval::evaluate_assertions(cs.grid, plan.asserts);
  } catch (const std::exception& e) {
    cs.error = e.what();
  }
  cs.seconds = seconds_since(t0);
  return cs;
}

std::string rates(const eval::AblationResult& g) {
  std::ostringstream o;
  for (std::size_t a = 0; a < g.arms.size(); ++a)
    o << g.arms[a] << " success " << fmt("%.3f", g.aggregates[a].success_rate) << " collision "
      << fmt("%.3f", g.aggregates[a].collision_rate) << " atd " << fmt("%.3f", g.aggregates[a].atd.mean) << "; ";
  return o.str();
}

Verdict case_study(const CaseStudy& cs) {
  if (!cs.error.empty()) return {false, cs.error};
  bool pass = cs.grid.failures() == 0 && cs.seconds < 1800 && cs.outcomes.size() == 4;
  std::string detail = rates(cs.grid);
  for (std::size_t i = 0; i < 3 && i < cs.outcomes.size(); ++i) {
    pass = pass && cs.outcomes[i].pass;
    detail += (cs.outcomes[i].pass ? "ok " : "miss ") + cs.outcomes[i].text + "; ";
  }
  return {pass, detail + "50k transitions x 5 seeds, " + fmt("%.1f", cs.seconds) + " s"};
}

Verdict conservatism(const CaseStudy& cs) {
  if (!cs.error.empty()) return {false, cs.error};
  auto b = grid_buffer();
  Transition t;
  t.s = t.s_next = State::cell(0, 0);
  t.a = Action::discrete(0);
  b.push(t);
  const double a0 = eval::average_trajectory_discrepancy(b, {State::cell(0, 0)});
  const double a5 = eval::average_trajectory_discrepancy(b, {State::cell(3, 4)});
  const double a15 = eval::average_trajectory_discrepancy(b, {State::cell(0, 0), State::cell(0, 3)});
  const bool hand = a0 == 0.0 && a5 == 5.0 && a15 == 1.5;
  const bool order = cs.outcomes.size() == 4 && cs.outcomes[3].pass;
  return {hand && order && cs.grid.failures() == 0,
          (cs.outcomes.size() == 4 ? cs.outcomes[3].text : std::string("no outcome")) + "; hand values " +
              fmt("%g", a0) + " / " + fmt("%g", a5) + " / " + fmt("%g", a15)};
}

Verdict corridor_fixture() {
  const auto t0 = Clock::now();
  const auto rep = eval::appendix_a_scenario();
  const double secs = seconds_since(t0);
  std::string detail;
  for (const auto& c : rep.cases) detail += "case " + std::to_string(c.id) + (c.pass ? " ok; " : " fails; ");
  return {rep.pass && secs < 60.0, detail + fmt("%.1f", secs) + " s"};
}

Verdict normalization() {
  const auto& ref = eval::ScoreReference::d4rl().at("maze2d-umaze|sparse");
  const double hi = eval::normalize_score(161.86, ref), lo = eval::normalize_score(23.85, ref);
  return {hi == 100.0 && lo == 0.0, "161.86 -> " + fmt("%.17g", hi) + ", 23.85 -> " + fmt("%.17g", lo)};
}

Verdict model_error() {
  const auto t0 = Clock::now();
  const auto plan = eval::preset("point-model-error");
  const auto& cfg = plan.arms.at(0);
  const auto spec = eval::make_spec(cfg);
  std::vector<dyn::ModelErrorReport> reports;
  bool finite = true;
  for (auto seed : plan.seeds) {
    const auto ds = eval::stage_dataset(cfg, spec, seed);
    const auto mp = eval::stage_models(cfg, spec, ds, seed);
    reports.push_back(mp.error);
    finite = finite && std::isfinite(mp.error.forward.mse) && std::isfinite(mp.error.reverse.mse) &&
             mp.error.forward.evaluated > 0 && mp.error.reverse.evaluated > 0;
  }
  const auto table = dyn::model_error_table(reports);
  std::istringstream lines(table);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  const bool schema = header.rfind("dataset_type,environment,forward_model,reverse_model", 0) == 0 && !row.empty() &&
                      !std::getline(lines, extra);
  std::ostringstream detail;
  detail << plan.seeds.size() << " seeds, ";
  for (const auto& r : reports)
    detail << "seed " << r.seed << " fwd " << fmt("%.3e", r.forward.mse) << " rev " << fmt("%.3e", r.reverse.mse)
           << "; ";
  detail << "table row: " << row << "; " << fmt("%.1f", seconds_since(t0)) << " s";
  return {finite && schema && reports.size() == 3, detail.str()};
}

Verdict determinism() {
  const auto root = fs::temp_directory_path() / "romilab_acceptance_det";
  fs::remove_all(root);
  const auto t0 = Clock::now();
  const int c1 = run_cli("pipeline --seed 7 --out " + (root / "a").string());
  const int c2 = run_cli("pipeline --seed 7 --out " + (root / "b").string());
  if (c1 != 0 || c2 != 0) return {false, "pipeline exit codes " + std::to_string(c1) + ", " + std::to_string(c2)};
  const auto a = read_text_file((root / "a" / "eval.csv").string());
  const auto b = read_text_file((root / "b" / "eval.csv").string());
  const bool same = a == b && !a.empty();
  const auto secs = seconds_since(t0);
  fs::remove_all(root);
  return {same, std::string(same ? "eval.csv identical" : "eval.csv differs") + " across two default-config runs, seed 7, " +
                    fmt("%.1f", secs) + " s"};
}

// rows x columns of a CSV, or empty when ragged
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells(1);
    for (char ch : line) {
      if (ch == ',') cells.emplace_back();
      else cells.back() += ch;
    }
    if (!rows.empty() && cells.size() != rows[0].size()) return {};
    rows.push_back(cells);
  }
  return rows;
}

Verdict grids() {
  const auto t0 = Clock::now();
  std::ostringstream detail;
  bool pass = true;
  for (const auto& [name, n_arms] : {std::pair<std::string, std::size_t>{"rollout-length", 4}, {"eta-sweep", 5}}) {
    const auto plan = eval::preset(name);
    const auto r1 = eval::run_ablation_grid(plan.arms, plan.seeds);
    const auto r2 = eval::run_ablation_grid(plan.arms, plan.seeds);
    const auto sweep = parse_csv(r1.sweep_csv());
    const auto grid = parse_csv(r1.csv());
    bool formed = plan.arms.size() == n_arms && r1.failures() == 0 && sweep.size() == 2 &&
                  sweep[0].size() == n_arms + 1 && grid.size() == 1 + n_arms * (plan.seeds.size() + 1);
    if (formed)
      for (std::size_t c = 1; c < sweep[1].size(); ++c) formed = formed && sweep[1][c].find("±") != std::string::npos;
    const bool same = r1.csv() == r2.csv() && r1.sweep_csv() == r2.sweep_csv();
    pass = pass && formed && same;
    detail << name << ": " << n_arms << " arms x " << plan.seeds.size() << " seeds, "
           << (formed ? "well-formed" : "malformed") << ", " << (same ? "deterministic" : "nondeterministic") << " [";
    for (std::size_t c = 1; sweep.size() == 2 && c < sweep[1].size(); ++c)
      detail << (c > 1 ? " | " : "") << sweep[0][c] << " " << sweep[1][c];
    detail << "]; ";
  }
  detail << fmt("%.1f", seconds_since(t0)) << " s";
  return {pass, detail.str()};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  };
  report("gradient-oracle", gradient_oracle);
  report("tabular-mle-oracle", tabular_mle);
  report("imagination-enumeration-oracle", imagination_enumeration);
  report("anchor-invariants", anchor_invariants);
  const CaseStudy cs = run_case_study();
  report("case-study", [&] { return case_study(cs); });
  report("conservatism-atd", [&] { return conservatism(cs); });
  report("corridor-fixture", corridor_fixture);
  report("score-normalization", normalization);
  report("model-error-harness", model_error);
  report("determinism", determinism);
  report("ablation-grids", grids);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
