#include "romilab/evalharness/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace romilab::eval {

namespace {

constexpr double kCell = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Pixel position of a state: grid cells map to their centers.
std::pair<double, double> pixel(const env::MazeSpec& spec, const State& s) {
  if (spec.space == env::SpaceKind::grid) return {(s.col() + 0.5) * kCell, (s.row() + 0.5) * kCell};
  return {s.x() * kCell, s.y() * kCell};
}

void open_svg(std::ostringstream& o, double w, double h) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
    << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void maze_cells(std::ostringstream& o, const env::MazeSpec& spec) {
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) {
      const char* fill = spec.is_blocked(r, c) ? "#444" : spec.is_goal_cell(r, c) ? "#ffe9a8" : "#fafafa";
      o << "<rect x=\"" << num(c * kCell) << "\" y=\"" << num(r * kCell) << "\" width=\"" << num(kCell)
        << "\" height=\"" << num(kCell) << "\" fill=\"" << fill << "\" stroke=\"#ddd\"/>\n";
    }
}

}  // namespace

std::string trajectories_svg(const env::MazeSpec& spec, const data::TransitionBuffer& dataset,
                             const std::vector<Trajectory>& trajs, std::size_t max_trajectories) {
  std::ostringstream o;
  open_svg(o, spec.cols * kCell, spec.rows * kCell);
  maze_cells(o, spec);
  // Thin the dataset cloud so large buffers stay a reasonable file size.
  const std::size_t stride = std::max<std::size_t>(1, dataset.size() / 3000);
  for (std::size_t i = 0; i < dataset.size(); i += stride) {
    const auto [x, y] = pixel(spec, dataset[i].s);
    o << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"1.5\" fill=\"#9ab\" opacity=\"0.5\"/>\n";
  }
  for (std::size_t k = 0; k < std::min(max_trajectories, trajs.size()); ++k) {
    const auto& t = trajs[k];
    const char* color = t.collided ? "#d33" : t.success ? "#2a2" : "#888";
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" opacity=\"0.7\" points=\"";
    for (const auto& s : t.states) {
      const auto [x, y] = pixel(spec, s);
      o << num(x) << "," << num(y) << " ";
    }
    o << "\"/>\n";
    if (!t.states.empty()) {
      const auto [x, y] = pixel(spec, t.states.front());
      o << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string nn_distance_heatmap_svg(const env::MazeSpec& spec, const DiscrepancyIndex& index,
                                    int samples_per_cell) {
  const int n = std::max(1, samples_per_cell);
  const double step = 1.0 / n;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(spec.rows * spec.cols * n * n));
  double mx = 0;
  for (int r = 0; r < spec.rows * n; ++r)
    for (int c = 0; c < spec.cols * n; ++c) {
      State s = State::of_dim(spec.state_dim());
      if (spec.space == env::SpaceKind::grid) {
        s[0] = (r + 0.5) * step - 0.5;
        s[1] = (c + 0.5) * step - 0.5;
      } else {
        s[0] = (c + 0.5) * step;
        s[1] = (r + 0.5) * step;
      }
      dist.push_back(index.nearest(s));
      mx = std::max(mx, dist.back());
    }
  std::ostringstream o;
  open_svg(o, spec.cols * kCell, spec.rows * kCell + 20);
  const double px = kCell * step;
  std::size_t i = 0;
  for (int r = 0; r < spec.rows * n; ++r)
    for (int c = 0; c < spec.cols * n; ++c, ++i) {
      const int shade = static_cast<int>(std::lround(255 * (1 - (mx > 0 ? dist[i] / mx : 0))));
      o << "<rect x=\"" << num(c * px) << "\" y=\"" << num(r * px) << "\" width=\"" << num(px) << "\" height=\""
        << num(px) << "\" fill=\"rgb(255," << shade << "," << shade << ")\"/>\n";
    }
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c)
      if (spec.is_blocked(r, c))
        o << "<rect x=\"" << num(c * kCell) << "\" y=\"" << num(r * kCell) << "\" width=\"" << num(kCell)
          << "\" height=\"" << num(kCell) << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"2\"/>\n";
  o << "<text x=\"4\" y=\"" << num(spec.rows * kCell + 15) << "\" font-size=\"12\" font-family=\"sans-serif\">"
    << "max nearest-neighbor distance " << num(mx) << "</text>\n</svg>\n";
  return o.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& means, const std::vector<double>& stds) {
  const double w = 80.0 * std::max<std::size_t>(1, labels.size()) + 60, h = 260, base = 220, top = 30;
  double mx = 0;
  for (std::size_t i = 0; i < means.size(); ++i)
    mx = std::max(mx, means[i] + (i < stds.size() ? stds[i] : 0.0));
  if (!(mx > 0)) mx = 1;
  std::ostringstream o;
  open_svg(o, w, h);
  o << "<text x=\"10\" y=\"18\" font-size=\"14\" font-family=\"sans-serif\">" << escape(title) << "</text>\n";
  o << "<line x1=\"40\" y1=\"" << num(base) << "\" x2=\"" << num(w - 10) << "\" y2=\"" << num(base)
    << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < labels.size() && i < means.size(); ++i) {
    const double x = 50 + 80.0 * i, bh = (base - top) * means[i] / mx;
    o << "<rect x=\"" << num(x) << "\" y=\"" << num(base - bh) << "\" width=\"50\" height=\"" << num(bh)
      << "\" fill=\"#6a8fc7\"/>\n";
    if (i < stds.size() && stds[i] > 0) {
      const double y0 = base - (base - top) * (means[i] - stds[i]) / mx;
      const double y1 = base - (base - top) * (means[i] + stds[i]) / mx;
      o << "<line x1=\"" << num(x + 25) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x + 25) << "\" y2=\""
        << num(y1) << "\" stroke=\"black\"/>\n";
    }
    o << "<text x=\"" << num(x + 25) << "\" y=\"" << num(base + 15)
      << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" << escape(labels[i])
      << "</text>\n";
    o << "<text x=\"" << num(x + 25) << "\" y=\"" << num(base - bh - 4)
      << "\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">" << num(means[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string table_svg(const std::string& title, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows, int highlight_row) {
  const double colw = 130, rowh = 22;
  const double w = colw * std::max<std::size_t>(1, header.size()) + 20;
  const double h = rowh * (rows.size() + 2) + 20;
  std::ostringstream o;
  open_svg(o, w, h);
  o << "<text x=\"10\" y=\"18\" font-size=\"14\" font-family=\"sans-serif\">" << escape(title) << "</text>\n";
  const auto line = [&](const std::vector<std::string>& cells, double y, bool bold) {
    for (std::size_t c = 0; c < cells.size(); ++c)
      o << "<text x=\"" << num(10 + colw * c) << "\" y=\"" << num(y) << "\" font-size=\"12\" font-family=\"monospace\""
        << (bold ? " font-weight=\"bold\"" : "") << ">" << escape(cells[c]) << "</text>\n";
  };
  line(header, 2 * rowh + 10, true);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = (r + 3) * rowh + 10;
    if (static_cast<int>(r) == highlight_row)
      o << "<rect x=\"5\" y=\"" << num(y - 15) << "\" width=\"" << num(w - 10) << "\" height=\"" << num(rowh)
        << "\" fill=\"#fff3b0\"/>\n";
    line(rows[r], y, false);
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace romilab::eval
