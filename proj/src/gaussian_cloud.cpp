#include "gsgrasp/gaussian_cloud.hpp"

#include "gsgrasp/spatial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gsg {

Mat3 covariance(const Quat& rotation, const Vec3& log_scales) {
  const Mat3 r = rotation.normalized().toRotationMatrix();
  const Vec3 s2 = (2.0 * log_scales).array().exp();
  Mat3 c = r * s2.asDiagonal() * r.transpose();
  // Mirror the upper triangle so the result is exactly symmetric.
  c(1, 0) = c(0, 1);
  c(2, 0) = c(0, 2);
  c(2, 1) = c(1, 2);
  return c;
}

Mat3 GaussianCloud::covariance(std::size_t i) const { return gsg::covariance(rotations[i], log_scales[i]); }

void GaussianCloud::reserve(std::size_t n) {
  positions.reserve(n);
  rotations.reserve(n);
  log_scales.reserve(n);
  opacity_logits.reserve(n);
  sh.reserve(n * static_cast<std::size_t>(sh_count()) * 3);
}

void GaussianCloud::push_back(const Vec3& pos, const Quat& rot, const Vec3& log_scale, double opacity_logit,
                              std::span<const double> sh_coeffs, int bone_id) {
  if (sh_coeffs.size() != static_cast<std::size_t>(sh_count()) * 3)
    throw DimensionError("SH coefficient count does not match degree");
  if (bone_id >= 0 || !bone_ids.empty()) {
    bone_ids.resize(size(), -1);
    bone_ids.push_back(bone_id);
  }
  positions.push_back(pos);
  rotations.push_back(rot);
  log_scales.push_back(log_scale);
  opacity_logits.push_back(opacity_logit);
  sh.insert(sh.end(), sh_coeffs.begin(), sh_coeffs.end());
}

void GaussianCloud::push_from(const GaussianCloud& other, std::size_t i) {
  if (other.sh_degree != sh_degree) throw DimensionError("SH degree mismatch");
  const std::size_t c = static_cast<std::size_t>(sh_count()) * 3;
  const int bone = other.bone_ids.empty() ? -1 : other.bone_ids[i];
  push_back(other.positions[i], other.rotations[i], other.log_scales[i], other.opacity_logits[i],
            std::span<const double>(other.sh.data() + i * c, c), bone);
}

GaussianCloud GaussianCloud::subset(std::span<const std::size_t> indices) const {
  GaussianCloud out;
  out.sh_degree = sh_degree;
  out.reserve(indices.size());
  const std::size_t c = static_cast<std::size_t>(sh_count()) * 3;
  for (std::size_t i : indices) {
    out.positions.push_back(positions[i]);
    out.rotations.push_back(rotations[i]);
    out.log_scales.push_back(log_scales[i]);
    out.opacity_logits.push_back(opacity_logits[i]);
    out.sh.insert(out.sh.end(), sh.begin() + static_cast<std::ptrdiff_t>(i * c),
                  sh.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    if (!bone_ids.empty()) out.bone_ids.push_back(bone_ids[i]);
  }
  return out;
}

void GaussianCloud::validate() const {
  const std::size_t n = size();
  if (sh_degree < 0 || sh_degree > 3) throw InvalidArgument("sh_degree must be in 0..3");
  if (rotations.size() != n || log_scales.size() != n || opacity_logits.size() != n ||
      sh.size() != n * static_cast<std::size_t>(sh_count()) * 3 || (!bone_ids.empty() && bone_ids.size() != n))
    throw DimensionError("Gaussian cloud arrays disagree in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(rotations[i].norm() - 1.0) > 1e-6)
      throw InvalidArgument("Gaussian " + std::to_string(i) + " has a non-unit quaternion");
    if (!positions[i].allFinite() || !log_scales[i].allFinite() || !std::isfinite(opacity_logits[i]))
      throw InvalidArgument("Gaussian " + std::to_string(i) + " has non-finite state");
  }
}

std::pair<Vec3, Vec3> bone_segment(const SkeletonDef& skel, std::size_t bone) {
  const auto& heads = skel.rest_heads();
  const int parent = skel.bones()[bone].parent;
  if (parent >= 0) return {heads[static_cast<std::size_t>(parent)], heads[bone]};
  Vec3 centroid = Vec3::Zero();
  int children = 0;
  for (std::size_t c = 0; c < skel.bone_count(); ++c) {
    if (skel.bones()[c].parent == static_cast<int>(bone)) {
      centroid += heads[c];
      ++children;
    }
  }
  if (children == 0) return {heads[bone], heads[bone]};
  return {heads[bone], centroid / children};
}

GaussianCloud init_from_skeleton(const SkeletonDef& skel, std::size_t n_per_bone, std::uint64_t seed,
                                 const InitOptions& opts) {
  GaussianCloud cloud;
  cloud.sh_degree = opts.sh_degree;
  const std::size_t total = n_per_bone * skel.bone_count();
  cloud.reserve(total);
  cloud.bone_ids.reserve(total);
  if (n_per_bone == 0) return cloud;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dc = (opts.base_gray - 0.5) / 0.28209479177387814;
  std::vector<double> coeffs(static_cast<std::size_t>(cloud.sh_count()) * 3, 0.0);
  coeffs[0] = coeffs[1] = coeffs[2] = dc;
  const double opacity_logit = logit(opts.initial_opacity);

  std::vector<Vec3> samples(n_per_bone);
  for (std::size_t b = 0; b < skel.bone_count(); ++b) {
    const auto [a, c] = bone_segment(skel, b);
    const Vec3 mid = 0.5 * (a + c);
    double len = (c - a).norm();
    if (len == 0.0) len = std::max(1e-3, 0.1 * skel.rest_extent());
    const double sigma = opts.sigma_factor * len;
    for (auto& s : samples) s = mid + sigma * Vec3(normal(rng), normal(rng), normal(rng));

    double mean_nn = sigma;
    if (n_per_bone > 1) {
      SpatialGrid grid(samples, SpatialGrid::cell_for_density(samples, 2.0));
      double acc = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) acc += grid.nearest(samples[i], static_cast<long>(i)).distance;
      mean_nn = acc / static_cast<double>(samples.size());
    }
    const double s = std::log(std::max(opts.scale_factor * mean_nn, 1e-7));
    for (const auto& p : samples)
      cloud.push_back(p, Quat::Identity(), Vec3::Constant(s), opacity_logit, coeffs, static_cast<int>(b));
  }
  return cloud;
}

std::vector<std::size_t> opacity_survivors(const GaussianCloud& cloud, double threshold) {
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.opacity(i) >= threshold) keep.push_back(i);
  return keep;
}

GaussianCloud prune_by_opacity(const GaussianCloud& cloud, double threshold) {
  return cloud.subset(opacity_survivors(cloud, threshold));
}

bool inside_mask(const Camera& cam, const Mask& mask, const Vec3& center) {
  const Vec3 pc = cam.to_camera(center);
  if (pc.z() <= 0.0) return false;
  const double u = cam.fx * pc.x() / pc.z() + cam.cx;
  const double v = cam.fy * pc.y() / pc.z() + cam.cy;
  const double px = std::floor(u + 0.5), py = std::floor(v + 0.5);
  if (!(px >= 0.0 && py >= 0.0 && px < mask.width && py < mask.height)) return false;
  return mask.at(static_cast<int>(px), static_cast<int>(py)) != 0;
}

std::vector<std::size_t> mask_survivors(const GaussianCloud& cloud, const ObjectMaskSet& masks, std::size_t min_views) {
  if (masks.masks.empty() || masks.masks.size() != masks.cameras.size())
    throw DimensionError("mask set needs one camera per mask and at least one view");
  if (min_views == 0 || min_views > masks.masks.size())
    throw InvalidArgument("min_views must be in 1..view count");
  for (std::size_t v = 0; v < masks.masks.size(); ++v) {
    if (masks.masks[v].width != masks.cameras[v].width || masks.masks[v].height != masks.cameras[v].height)
      throw DimensionError("mask " + std::to_string(v) + " does not match its camera's image size");
  }
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::size_t outside = 0;
    for (std::size_t v = 0; v < masks.masks.size() && outside < min_views; ++v)
      if (!inside_mask(masks.cameras[v], masks.masks[v], cloud.positions[i])) ++outside;
    if (outside < min_views) keep.push_back(i);
  }
  return keep;
}

GaussianCloud cull_outside_masks(const GaussianCloud& cloud, const ObjectMaskSet& masks, std::size_t min_views) {
  return cloud.subset(mask_survivors(cloud, masks, min_views));
}

Concatenated concat(const GaussianCloud& a, const GaussianCloud& b) {
  if (a.sh_degree != b.sh_degree)
    throw DimensionError("cannot concatenate clouds with SH degrees " + std::to_string(a.sh_degree) + " and " +
                         std::to_string(b.sh_degree));
  Concatenated out;
  out.boundary = a.size();
  if (a.empty()) {
    out.cloud = b;
    return out;
  }
  out.cloud = a;
  auto& c = out.cloud;
  c.positions.insert(c.positions.end(), b.positions.begin(), b.positions.end());
  c.rotations.insert(c.rotations.end(), b.rotations.begin(), b.rotations.end());
  c.log_scales.insert(c.log_scales.end(), b.log_scales.begin(), b.log_scales.end());
  c.opacity_logits.insert(c.opacity_logits.end(), b.opacity_logits.begin(), b.opacity_logits.end());
  c.sh.insert(c.sh.end(), b.sh.begin(), b.sh.end());
  if (!a.bone_ids.empty() || !b.bone_ids.empty()) {
    c.bone_ids.resize(a.size(), -1);
    if (b.bone_ids.empty())
      c.bone_ids.resize(a.size() + b.size(), -1);
    else
      c.bone_ids.insert(c.bone_ids.end(), b.bone_ids.begin(), b.bone_ids.end());
  }
  return out;
}

}  // namespace gsg
