#pragma once

#include "gsgrasp/common.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/kinematics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gsg {

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  bool contains(const Vec3& p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
};

// Canonical points with per-bone skinning weights (rows sum to one).
struct WeightedTemplate {
  std::vector<Vec3> points;
  std::vector<double> weights;  // points.size() x bones, row-major
  int bones = 0;

  std::span<const double> row(std::size_t i) const {
    return {weights.data() + i * static_cast<std::size_t>(bones), static_cast<std::size_t>(bones)};
  }
  void validate() const;
};

// Voxel grid of skinning weights over `bounds`. Voxel (i,j,k) sits at
// lo + (i,j,k) * step, so the corners of the box are voxel centers. Weights
// are stored as a palette of distinct rows plus a per-voxel palette index.
class SkinningGrid {
 public:
  SkinningGrid() = default;
  SkinningGrid(std::array<int, 3> dims, Aabb bounds, int bones, std::vector<double> palette,
               std::vector<std::uint32_t> voxel_rows);

  const std::array<int, 3>& dims() const { return dims_; }
  const Aabb& bounds() const { return bounds_; }
  int bones() const { return bones_; }
  std::size_t voxel_count() const { return voxel_rows_.size(); }
  Vec3 step() const;
  Vec3 voxel_center(int i, int j, int k) const;
  std::size_t voxel_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
  }
  std::span<const double> voxel_weights(int i, int j, int k) const;

 private:
  std::array<int, 3> dims_{0, 0, 0};
  Aabb bounds_;
  int bones_ = 0;
  std::vector<double> palette_;
  std::vector<std::uint32_t> voxel_rows_;
};

// Per-Gaussian blended transform and the rotation extracted from it.
struct Blend {
  Mat4 transform = Mat4::Identity();
  Mat3 rotation = Mat3::Identity();
};

struct PosedCloud {
  GaussianCloud cloud;
  std::vector<Blend> blends;
};

enum class Execution { Serial, Parallel };

SkinningGrid build_grid(const WeightedTemplate& tmpl, std::array<int, 3> dims, const Aabb& bounds);

// Trilinear interpolation, clamped to the box, renormalized to sum to one.
Eigen::VectorXd sample_weights(const SkinningGrid& grid, const Vec3& query);

Blend blend_transforms(std::span<const double> weights, const BoneTransforms& bones);

// Nearest rotation (Frobenius) to `m`, determinant +1.
Mat3 polar_rotation(const Mat3& m);
// Quaternion of a rotation matrix; identity maps to exactly (1,0,0,0).
Quat rotation_quat(const Mat3& r);

// Applies fixed per-Gaussian blends to canonical state.
GaussianCloud apply_blends(const GaussianCloud& canonical, std::span<const Blend> blends,
                           Execution exec = Execution::Parallel);

PosedCloud pose_cloud(const GaussianCloud& canonical, const SkinningGrid& grid, const BoneTransforms& bones,
                      Execution exec = Execution::Parallel);

Vec3 canonical_view_dir(const Mat3& blend_rotation, const Vec3& view_dir_posed);

// One-hot template sampled along every bone segment; the segment from a
// parent head to a child head follows the parent bone.
WeightedTemplate make_segment_template(const SkeletonDef& skel, int samples_per_segment);
// Bounding box of the rest skeleton grown by `margin` on every side.
Aabb skeleton_bounds(const SkeletonDef& skel, double margin);

// Template file: uint32 M, uint32 B, M*3 float32 positions, M*B float32 weights.
void save_template(const WeightedTemplate& tmpl, const std::filesystem::path& path);
WeightedTemplate load_template(const std::filesystem::path& path);

// Grid cache: "GSGRID1\n", 3 x uint32 dims, 6 x float32 bounds (lo, hi),
// uint32 bones, then dense float32 weights in voxel order.
void save_grid(const SkinningGrid& grid, const std::filesystem::path& path);
SkinningGrid load_grid(const std::filesystem::path& path);

}  // namespace gsg
