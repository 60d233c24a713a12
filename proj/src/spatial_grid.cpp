#include "gsgrasp/spatial_grid.hpp"

#include <algorithm>
#include <limits>

namespace gsg {

SpatialGrid::SpatialGrid(std::span<const Vec3> points, double min_cell, std::size_t max_cells)
    : points_(points) {
  if (!(min_cell > 0.0)) throw InvalidArgument("grid cell size must be positive");
  if (points.empty()) {
    starts_.assign(2, 0);
    return;
  }
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  const Vec3 extent = hi - lo;
  cell_ = min_cell;
  auto count_cells = [&](double c) {
    double total = 1.0;
    for (int a = 0; a < 3; ++a) total *= std::floor(extent[a] / c) + 1.0;
    return total;
  };
  while (count_cells(cell_) > static_cast<double>(max_cells)) cell_ *= 1.25;
  for (int a = 0; a < 3; ++a) dims_[a] = static_cast<long>(std::floor(extent[a] / cell_)) + 1;

  const std::size_t ncells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  std::vector<std::uint32_t> cell_of(points.size());
  starts_.assign(ncells + 1, 0);
  for (std::size_t n = 0; n < points.size(); ++n) {
    const long i = std::clamp(cell_coord(points[n].x(), 0), 0L, dims_[0] - 1);
    const long j = std::clamp(cell_coord(points[n].y(), 1), 0L, dims_[1] - 1);
    const long k = std::clamp(cell_coord(points[n].z(), 2), 0L, dims_[2] - 1);
    cell_of[n] = static_cast<std::uint32_t>(flat(i, j, k));
    ++starts_[cell_of[n] + 1];
  }
  for (std::size_t c = 0; c < ncells; ++c) starts_[c + 1] += starts_[c];
  order_.resize(points.size());
  std::vector<std::uint32_t> fill(starts_.begin(), starts_.end() - 1);
  for (std::size_t n = 0; n < points.size(); ++n) order_[fill[cell_of[n]]++] = static_cast<std::uint32_t>(n);
}

SpatialGrid::Hit SpatialGrid::nearest(const Vec3& q, long skip) const {
  Hit best;
  if (points_.empty()) return best;
  best.distance = std::numeric_limits<double>::infinity();
  std::array<long, 3> qc{};
  long start_ring = 0;
  for (int a = 0; a < 3; ++a) {
    qc[a] = cell_coord(q[a], a);
    // Rings closer than this cannot intersect the occupied box.
    const long gap = qc[a] < 0 ? -qc[a] : (qc[a] >= dims_[a] ? qc[a] - dims_[a] + 1 : 0);
    start_ring = std::max(start_ring, gap);
  }
  const long max_ring = start_ring + std::max({dims_[0], dims_[1], dims_[2]});

  auto visit_cell = [&](long i, long j, long k) {
    const std::size_t c = flat(i, j, k);
    for (std::uint32_t s = starts_[c]; s < starts_[c + 1]; ++s) {
      const long idx = order_[s];
      if (idx == skip) continue;
      const double d = (points_[idx] - q).norm();
      if (d < best.distance || (d == best.distance && idx < best.index)) {
        best.distance = d;
        best.index = idx;
      }
    }
  };

  for (long ring = start_ring; ring <= max_ring; ++ring) {
    const long i0 = std::max(0L, qc[0] - ring), i1 = std::min(dims_[0] - 1, qc[0] + ring);
    const long j0 = std::max(0L, qc[1] - ring), j1 = std::min(dims_[1] - 1, qc[1] + ring);
    const long k0 = std::max(0L, qc[2] - ring), k1 = std::min(dims_[2] - 1, qc[2] + ring);
    for (long i = i0; i <= i1; ++i) {
      const bool i_face = std::abs(i - qc[0]) == ring;
      for (long j = j0; j <= j1; ++j) {
        const bool face = i_face || std::abs(j - qc[1]) == ring;
        if (face) {
          for (long k = k0; k <= k1; ++k) visit_cell(i, j, k);
        } else {
          const long kl = qc[2] - ring, kh = qc[2] + ring;
          if (kl >= k0 && kl <= k1) visit_cell(i, j, kl);
          if (kh >= k0 && kh <= k1) visit_cell(i, j, kh);
        }
      }
    }
    // Every cell in ring+1 is at least ring*cell away.
    if (best.index >= 0 && best.distance < static_cast<double>(ring) * cell_ * (1.0 - 1e-9)) break;
  }
  return best;
}

double SpatialGrid::cell_for_density(std::span<const Vec3> points, double per_cell) {
  if (points.size() < 2) return 1.0;
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Flat or line-like sets would otherwise get needle-thin cells.
  const Vec3 raw = hi - lo;
  const Vec3 ext = raw.cwiseMax(std::max(raw.maxCoeff() * 0.05, 1e-9));
  const double vol = ext.prod();
  const double c = std::cbrt(vol * per_cell / static_cast<double>(points.size()));
  return std::max({c, ext.maxCoeff() * 1e-6, 1e-12});
}

}  // namespace gsg
