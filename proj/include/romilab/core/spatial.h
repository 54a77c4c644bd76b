#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace romilab {

// Exact nearest-neighbor search over fixed-dimension points. Points are
// bucketed on their first two coordinates; full-dimension L2 distances are
// used for ranking, and the bucket ring search stops only when no unvisited
// bucket can hold a closer point.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  SpatialIndex(std::vector<double> flat_points, std::size_t dim, double cell = 1.0);

  std::size_t size() const { return dim_ ? points_.size() / dim_ : 0; }
  std::size_t dim() const { return dim_; }
  const double* point(std::size_t i) const { return points_.data() + i * dim_; }

  // Indices of the k nearest points, closest first, ties by lower index.
  std::vector<std::size_t> knn(const double* q, std::size_t k) const;
  double nearest_distance(const double* q) const;

 private:
  std::int64_t key(std::int64_t bx, std::int64_t by) const { return bx * 1000003LL + by; }
  std::int64_t bucket(double v) const;

  std::vector<double> points_;
  std::size_t dim_ = 0;
  double cell_ = 1.0;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
  std::int64_t min_bx_ = 0, max_bx_ = -1, min_by_ = 0, max_by_ = -1;
};

}  // namespace romilab
