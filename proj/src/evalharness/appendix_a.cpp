#include "romilab/evalharness/appendix_a.h"

#include <set>
#include <sstream>

#include "romilab/dataset/buffer.h"
#include "romilab/env/maze.h"
#include "romilab/learner/qlearn.h"

namespace romilab::eval {

namespace {

constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3;
constexpr int kCopies = 10;

// Row 1 holds the dataset corridor; the goal sits at its left end.
constexpr const char* kLayout =
    "........\n"
    "G.......\n"
    "........\n";

const State s_in = State::cell(1, 4);
// Imagined states, in the order both rollouts visit them from s_in.
const std::vector<State> kImagined = {State::cell(1, 5), State::cell(1, 6), State::cell(1, 7), State::cell(0, 7),
                                      State::cell(0, 6)};

data::Transition make(const env::MazeSpec& spec, const State& s, int a, data::Origin origin) {
  const auto o = env::step(spec, s, Action::discrete(a));
  data::Transition t;
  t.s = s;
  t.a = Action::discrete(a);
  t.r = o.reward;
  t.s_next = o.next_state;
  t.done = o.done;
  t.collided = o.collided;
  t.origin = origin;
  return t;
}

// Walks `actions` from `start` in the true maze, closing one episode.
void add_walk(data::TransitionBuffer& buf, const env::MazeSpec& spec, State start, const std::vector<int>& actions,
              data::Origin origin) {
  for (int a : actions) {
    const auto t = make(spec, start, a, origin);
    buf.push(t);
    start = t.s_next;
  }
  buf.end_episode();
}

data::TransitionBuffer empty_buffer(const env::MazeSpec& spec) {
  data::TransitionBuffer b;
  b.layout_id = spec.layout_id;
  b.state_dim = spec.state_dim();
  b.action_dim = spec.action_dim();
  return b;
}

// Forward rollout <s_in, a^f_1, s_1, ..., a^f_5, s_5>.
data::TransitionBuffer forward_rollouts(const env::MazeSpec& spec) {
  auto b = empty_buffer(spec);
  for (int k = 0; k < kCopies; ++k) add_walk(b, spec, s_in, {kRight, kRight, kRight, kUp, kLeft}, data::Origin::model);
  return b;
}

// Reverse rollout <s_5, a^r_5, s_4, ..., a^r_1, s_in>, generated backward
// from s_in and stored as forward-time transitions.
data::TransitionBuffer reverse_rollouts(const env::MazeSpec& spec) {
  auto b = empty_buffer(spec);
  const std::vector<int> into_prev = {kLeft, kLeft, kLeft, kDown, kRight};
  for (int k = 0; k < kCopies; ++k) {
    for (std::size_t i = 0; i < kImagined.size(); ++i)
      b.push(make(spec, kImagined[i], into_prev[i], data::Origin::model));
    b.end_episode();
  }
  return b;
}

bool chain_reaches(const data::TransitionBuffer& a, const data::TransitionBuffer& b, const State& from,
                   const State& to) {
  std::set<State> seen{from};
  std::vector<State> frontier{from};
  while (!frontier.empty()) {
    const State cur = frontier.back();
    frontier.pop_back();
    if (cur == to) return true;
    for (const auto* buf : {&a, &b})
      for (const auto& t : buf->transitions)
        if (t.s == cur && !t.done && seen.insert(t.s_next).second) frontier.push_back(t.s_next);
  }
  return false;
}

AppendixArm run_arm(const env::MazeSpec& spec, const data::TransitionBuffer& dataset,
                    const data::TransitionBuffer& imagined, const std::vector<std::pair<State, double>>& pinned) {
  learn::LearnerConfig cfg;
  cfg.steps = 20000;
  cfg.unseen_value = 0.0;
  data::MixedSampler sampler(dataset, imagined, 0.5, Rng(7));
  const auto q = learn::train_policy(sampler, cfg, spec, nullptr, pinned);
  AppendixArm arm;
  arm.chain_to_s5 = chain_reaches(dataset, imagined, s_in, kImagined.back());
  arm.first_action = learn::greedy_index(q, s_in, learn::execution_filter(q, s_in, cfg));
  State s = s_in;
  arm.path.push_back(s);
  bool collided = false;
  for (int t = 0; t < spec.episode_limit; ++t) {
    const auto o = env::step(spec, s, learn::greedy_action(q, s, cfg));
    s = o.next_state;
    arm.path.push_back(s);
    if (s == kImagined.back()) arm.visits_s5 = true;
    if (o.collided) collided = true;
    if (o.done) break;
  }
  arm.success = !collided && env::in_goal(spec, s);
  return arm;
}

}  // namespace

AppendixAReport appendix_a_scenario() {
  const auto spec = env::parse_layout(kLayout, "appendix-a-corridor", env::SpaceKind::grid, env::RewardMode::sparse, 20);
  auto dataset = empty_buffer(spec);
  for (int k = 0; k < kCopies; ++k) add_walk(dataset, spec, s_in, {kLeft, kLeft, kLeft, kLeft}, data::Origin::env);
  // Case 3 adds a dataset path from s_5 along the top row and down into the goal.
  auto dataset3 = dataset;
  for (int k = 0; k < kCopies; ++k)
    add_walk(dataset3, spec, kImagined.back(), {kLeft, kLeft, kLeft, kLeft, kLeft, kLeft, kDown}, data::Origin::env);

  const auto fwd = forward_rollouts(spec);
  const auto rev = reverse_rollouts(spec);
  const State s5 = kImagined.back();

  AppendixAReport rep;
  {
    AppendixCase c{1, "s_5 outside the dataset, value inflated", {}, {}, false};
    c.forward = run_arm(spec, dataset, fwd, {{s5, 50.0}});
    c.reverse = run_arm(spec, dataset, rev, {{s5, 50.0}});
    c.pass = c.forward.chain_to_s5 && c.forward.first_action == kRight && c.forward.visits_s5 &&
             !c.reverse.chain_to_s5 && c.reverse.success && !c.reverse.visits_s5;
    rep.cases.push_back(c);
  }
  {
    AppendixCase c{2, "s_5 outside the dataset, value not overestimated", {}, {}, false};
    c.forward = run_arm(spec, dataset, fwd, {{s5, 0.0}});
    c.reverse = run_arm(spec, dataset, rev, {{s5, 0.0}});
    c.pass = c.forward.success && c.reverse.success;
    rep.cases.push_back(c);
  }
  {
    AppendixCase c{3, "s_5 inside the dataset with a path to the goal", {}, {}, false};
    c.forward = run_arm(spec, dataset3, fwd, {});
    c.reverse = run_arm(spec, dataset3, rev, {});
    c.pass = c.forward.success && c.reverse.success;
    rep.cases.push_back(c);
  }
  rep.pass = true;
  for (const auto& c : rep.cases) rep.pass = rep.pass && c.pass;
  return rep;
}

std::string AppendixAReport::to_text() const {
  std::ostringstream o;
  const auto arm = [&](const char* name, const AppendixArm& a) {
    o << "  " << name << ": chain_to_s5=" << a.chain_to_s5 << " visits_s5=" << a.visits_s5
      << " success=" << a.success << " first_action=" << a.first_action << " path=";
    for (const auto& s : a.path) o << to_string(s);
    o << "\n";
  };
  for (const auto& c : cases) {
    o << "case " << c.id << " (" << c.description << "): " << (c.pass ? "pass" : "fail") << "\n";
    arm("forward", c.forward);
    arm("reverse", c.reverse);
  }
  return o.str();
}

}  // namespace romilab::eval
