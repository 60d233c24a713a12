#pragma once

#include "gsgrasp/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace gsg {

// Dense uniform grid over the bounding box of a static point set. Points are
// bucketed by counting sort, so iteration order inside a cell is ascending
// index and every query is deterministic.
class SpatialGrid {
 public:
  struct Hit {
    long index = -1;     // -1 when the grid is empty
    double distance = 0.0;
  };

  // `min_cell` is a lower bound; the cell grows when the box would need more
  // than `max_cells` cells.
  SpatialGrid(std::span<const Vec3> points, double min_cell, std::size_t max_cells = std::size_t{1} << 22);

  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_; }

  // Calls f(index) for every point in cells overlapping the axis-aligned box
  // of the ball (q, radius). A superset of the points within `radius`.
  template <class F>
  void for_each_candidate(const Vec3& q, double radius, F&& f) const {
    if (points_.empty()) return;
    const double r = radius * (1.0 + 1e-9) + 1e-12;
    std::array<long, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0L, cell_coord(q[a] - r, a));
      hi[a] = std::min(dims_[a] - 1, cell_coord(q[a] + r, a));
      if (lo[a] > hi[a]) return;
    }
    for (long i = lo[0]; i <= hi[0]; ++i)
      for (long j = lo[1]; j <= hi[1]; ++j)
        for (long k = lo[2]; k <= hi[2]; ++k) {
          const std::size_t c = flat(i, j, k);
          for (std::uint32_t s = starts_[c]; s < starts_[c + 1]; ++s) f(static_cast<long>(order_[s]));
        }
  }

  // Exact nearest neighbor by Euclidean distance; ties resolve to the lowest
  // index. `skip` excludes one index (for nearest-other-point queries).
  Hit nearest(const Vec3& q, long skip = -1) const;

  // Suggested cell size for ~`per_cell` points per cell.
  static double cell_for_density(std::span<const Vec3> points, double per_cell);

 private:
  long cell_coord(double x, int axis) const {
    return static_cast<long>(std::floor((x - origin_[axis]) / cell_));
  }
  std::size_t flat(long i, long j, long k) const {
    return static_cast<std::size_t>((i * dims_[1] + j) * dims_[2] + k);
  }

  std::span<const Vec3> points_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<long, 3> dims_{1, 1, 1};
  std::vector<std::uint32_t> starts_;
  std::vector<std::uint32_t> order_;
};

}  // namespace gsg
