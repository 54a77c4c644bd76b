#include "romilab/core/spatial.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "romilab/core/error.h"

namespace romilab {

SpatialIndex::SpatialIndex(std::vector<double> flat, std::size_t dim, double cell)
    : points_(std::move(flat)), dim_(dim), cell_(cell) {
  if (dim < 2) throw DimensionError("SpatialIndex needs at least two coordinates");
  if (points_.size() % dim != 0) throw DimensionError("SpatialIndex point buffer is ragged");
  if (!(cell > 0)) throw ConfigError("SpatialIndex cell size must be > 0");
  min_bx_ = min_by_ = std::numeric_limits<std::int64_t>::max();
  max_bx_ = max_by_ = std::numeric_limits<std::int64_t>::min();
  for (std::size_t i = 0; i < size(); ++i) {
    const auto bx = bucket(point(i)[0]), by = bucket(point(i)[1]);
    buckets_[key(bx, by)].push_back(i);
    min_bx_ = std::min(min_bx_, bx);
    max_bx_ = std::max(max_bx_, bx);
    min_by_ = std::min(min_by_, by);
    max_by_ = std::max(max_by_, by);
  }
}

std::int64_t SpatialIndex::bucket(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_));
}

std::vector<std::size_t> SpatialIndex::knn(const double* q, std::size_t k) const {
  if (size() == 0 || k == 0) return {};
  k = std::min(k, size());
  const auto qx = bucket(q[0]), qy = bucket(q[1]);
  // Ring radius beyond which every bucket lies outside the occupied extent.
  const std::int64_t max_ring = std::max({std::abs(qx - min_bx_), std::abs(qx - max_bx_),
                                          std::abs(qy - min_by_), std::abs(qy - max_by_)});
  std::vector<std::pair<double, std::size_t>> best;  // (squared distance, index), sorted
  const auto consider = [&](std::size_t i) {
    const double* p = point(i);
    double d2 = 0;
    for (std::size_t j = 0; j < dim_; ++j) d2 += (p[j] - q[j]) * (p[j] - q[j]);
    const std::pair<double, std::size_t> item{d2, i};
    if (best.size() == k && !(item < best.back())) return;
    best.insert(std::upper_bound(best.begin(), best.end(), item), item);
    if (best.size() > k) best.pop_back();
  };
  const auto visit = [&](std::int64_t bx, std::int64_t by) {
    const auto it = buckets_.find(key(bx, by));
    if (it != buckets_.end())
      for (std::size_t i : it->second) consider(i);
  };
  for (std::int64_t r = 0; r <= max_ring; ++r) {
    if (r == 0) {
      visit(qx, qy);
    } else {
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        visit(qx + dx, qy - r);
        visit(qx + dx, qy + r);
      }
      for (std::int64_t dy = -r + 1; dy <= r - 1; ++dy) {
        visit(qx - r, qy + dy);
        visit(qx + r, qy + dy);
      }
    }
    // Unvisited buckets are at least r cells away along some axis.
    const double bound = static_cast<double>(r) * cell_;
    if (best.size() == k && best.back().first < bound * bound) break;
  }
  std::vector<std::size_t> out;
  out.reserve(best.size());
  for (const auto& [_, i] : best) out.push_back(i);
  return out;
}

double SpatialIndex::nearest_distance(const double* q) const {
  const auto nn = knn(q, 1);
  if (nn.empty()) throw PreconditionError("nearest_distance on an empty index");
  const double* p = point(nn[0]);
  double d2 = 0;
  for (std::size_t j = 0; j < dim_; ++j) d2 += (p[j] - q[j]) * (p[j] - q[j]);
  return std::sqrt(d2);
}

}  // namespace romilab
