#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/common.hpp"
#include "gsgrasp/image.hpp"
#include "gsgrasp/kinematics.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gsg {

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Structure-of-arrays Gaussian primitives. Scales live in log space and
// opacities as logits; colors are SH coefficients laid out [n][coeff][rgb].
struct GaussianCloud {
  int sh_degree = 0;
  std::vector<Vec3> positions;
  std::vector<Quat> rotations;
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> sh;
  std::vector<int> bone_ids;  // empty, or one per Gaussian

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  int sh_count() const { return sh_coeff_count(sh_degree); }

  double opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
  Vec3 scale(std::size_t i) const { return log_scales[i].array().exp(); }
  Mat3 covariance(std::size_t i) const;
  double* sh_ptr(std::size_t i) { return sh.data() + i * static_cast<std::size_t>(sh_count()) * 3; }
  const double* sh_ptr(std::size_t i) const {
    return sh.data() + i * static_cast<std::size_t>(sh_count()) * 3;
  }

  void reserve(std::size_t n);
  // Appends a primitive with the given SH coefficients (sh_count()*3 values).
  void push_back(const Vec3& pos, const Quat& rot, const Vec3& log_scale, double opacity_logit,
                 std::span<const double> sh_coeffs, int bone_id = -1);
  // Primitive `i` of `other` (same sh_degree).
  void push_from(const GaussianCloud& other, std::size_t i);

  // Keeps the listed indices in the given order.
  GaussianCloud subset(std::span<const std::size_t> indices) const;

  // Throws DimensionError / InvalidArgument on broken invariants.
  void validate() const;
};

struct ObjectMaskSet {
  std::vector<Mask> masks;
  std::vector<Camera> cameras;
};

struct Concatenated {
  GaussianCloud cloud;
  std::size_t boundary = 0;  // first index belonging to `b`
};

struct InitOptions {
  double sigma_factor = 0.25;     // midpoint normal std = factor * bone length
  double scale_factor = 0.5;      // initial scale = factor * mean NN distance
  double initial_opacity = 0.1;
  int sh_degree = 3;
  double base_gray = 0.5;
};

// R diag(exp(s))^2 R^T.
Mat3 covariance(const Quat& rotation, const Vec3& log_scales);

// Segment used for the bone's Gaussians: parent head to own head, or for the
// root its head to the centroid of its children.
std::pair<Vec3, Vec3> bone_segment(const SkeletonDef& skel, std::size_t bone);

GaussianCloud init_from_skeleton(const SkeletonDef& skel, std::size_t n_per_bone, std::uint64_t seed,
                                 const InitOptions& opts = {});

GaussianCloud prune_by_opacity(const GaussianCloud& cloud, double threshold);
// Indices that survive prune_by_opacity.
std::vector<std::size_t> opacity_survivors(const GaussianCloud& cloud, double threshold);

GaussianCloud cull_outside_masks(const GaussianCloud& cloud, const ObjectMaskSet& masks, std::size_t min_views = 1);
std::vector<std::size_t> mask_survivors(const GaussianCloud& cloud, const ObjectMaskSet& masks, std::size_t min_views = 1);
// True when `center` projects into an "on" mask pixel.
bool inside_mask(const Camera& cam, const Mask& mask, const Vec3& center);

Concatenated concat(const GaussianCloud& a, const GaussianCloud& b);

// Binary little-endian PLY in the common splatting viewer layout.
void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path);
GaussianCloud load_ply(const std::filesystem::path& path);

}  // namespace gsg
