#pragma once

#include <string>
#include <vector>

#include "romilab/dataset/buffer.h"
#include "romilab/env/maze.h"
#include "romilab/evalharness/metrics.h"

namespace romilab::eval {

// Maze walls, dataset states (light dots) and up to `max_trajectories`
// executed trajectories (red when collided, green on success).
std::string trajectories_svg(const env::MazeSpec& spec, const data::TransitionBuffer& dataset,
                             const std::vector<Trajectory>& trajs, std::size_t max_trajectories = 20);

// Nearest-dataset-state distance sampled on a sub-cell lattice; darker is
// farther from the data.
std::string nn_distance_heatmap_svg(const env::MazeSpec& spec, const DiscrepancyIndex& index,
                                    int samples_per_cell = 4);

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& means, const std::vector<double>& stds);

std::string table_svg(const std::string& title, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows, int highlight_row = -1);

}  // namespace romilab::eval
