#include "romilab/dynamics/model_error.h"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "romilab/core/error.h"

namespace romilab::dyn {

DirectionError evaluate_direction(const DynamicsModel& model, const data::TransitionBuffer& holdout) {
  if (holdout.empty()) throw PreconditionError("model error needs a non-empty holdout");
  const std::size_t sd = holdout[0].s.dim;
  DirectionError out;
  out.per_dim.assign(sd, 0.0);
  const bool rev = model.direction() == Direction::reverse;
  for (const auto& t : holdout.transitions) {
    const State& cond = rev ? t.s_next : t.s;
    const State& target = rev ? t.s : t.s_next;
    const auto pred = model.mean_state(cond, t.a);
    if (!pred) {
      ++out.skipped;
      continue;
    }
    for (std::size_t i = 0; i < sd; ++i) {
      const double d = pred->v[i] - target.v[i];
      out.per_dim[i] += d * d;
    }
    ++out.evaluated;
  }
  if (out.evaluated > 0) {
    double total = 0;
    for (auto& v : out.per_dim) {
      v /= static_cast<double>(out.evaluated);
      total += v;
    }
    out.mse = total / static_cast<double>(sd);
  }
  return out;
}

ModelErrorReport evaluate_model_error(const DynamicsModel& forward, const DynamicsModel& reverse,
                                      const data::TransitionBuffer& holdout) {
  if (forward.direction() != Direction::forward || reverse.direction() != Direction::reverse)
    throw PreconditionError("evaluate_model_error expects a forward and a reverse model");
  ModelErrorReport r;
  r.forward = evaluate_direction(forward, holdout);
  r.reverse = evaluate_direction(reverse, holdout);
  return r;
}

std::string model_error_csv(const std::vector<ModelErrorReport>& reports) {
  std::ostringstream os;
  os << std::setprecision(10);
  const std::size_t sd = reports.empty() ? 0 : reports.front().forward.per_dim.size();
  os << "dataset_type,environment,seed,forward_mse,reverse_mse";
  for (std::size_t i = 0; i < sd; ++i) os << ",forward_dim" << i;
  for (std::size_t i = 0; i < sd; ++i) os << ",reverse_dim" << i;
  os << ",forward_evaluated,forward_skipped,reverse_evaluated,reverse_skipped\n";
  for (const auto& r : reports) {
    os << r.dataset_type << ',' << r.environment << ',' << r.seed << ',' << r.forward.mse << ','
       << r.reverse.mse;
    for (double v : r.forward.per_dim) os << ',' << v;
    for (double v : r.reverse.per_dim) os << ',' << v;
    os << ',' << r.forward.evaluated << ',' << r.forward.skipped << ',' << r.reverse.evaluated << ','
       << r.reverse.skipped << '\n';
  }
  return os.str();
}

std::string model_error_table(const std::vector<ModelErrorReport>& reports) {
  struct Acc {
    std::vector<double> f, r;
  };
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& r : reports) {
    const auto key = std::make_pair(r.dataset_type, r.environment);
    if (!acc.count(key)) order.push_back(key);
    acc[key].f.push_back(r.forward.mse);
    acc[key].r.push_back(r.reverse.mse);
  }
  const auto stats = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) s += (x - m) * (x - m);
    return std::make_pair(m, std::sqrt(s / static_cast<double>(v.size())));
  };
  std::ostringstream os;
  os << "dataset_type,environment,forward_model,reverse_model,forward_mean,forward_std,reverse_mean,"
        "reverse_std,seeds\n";
  for (const auto& key : order) {
    const auto& a = acc[key];
    const auto [fm, fs] = stats(a.f);
    const auto [rm, rs] = stats(a.r);
    // Four decimals like the published table; errors below 1e-3 would print
    // as zero, so those switch to scientific notation.
    const auto cell = [](double m, double s) {
      std::ostringstream c;
      if (m >= 1e-3 || m == 0.0) c << std::fixed << std::setprecision(4);
      else c << std::scientific << std::setprecision(2);
      c << m << " ± " << s;
      return c.str();
    };
    os << key.first << ',' << key.second << ',' << cell(fm, fs) << ',' << cell(rm, rs) << ','
       << std::setprecision(10) << fm << ',' << fs << ',' << rm << ',' << rs << ',' << a.f.size()
       << '\n';
  }
  return os.str();
}

}  // namespace romilab::dyn
