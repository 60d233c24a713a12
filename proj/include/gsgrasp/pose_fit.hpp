#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/common.hpp"
#include "gsgrasp/kinematics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsg {

struct Keypoint2D {
  Vec2 uv = Vec2::Zero();
  double confidence = 0.0;
};

struct KeypointView {
  std::optional<Camera> camera;
  std::vector<Keypoint2D> points;  // one per joint
};

struct KeypointSet2D {
  std::vector<KeypointView> views;
  std::size_t joint_count() const { return views.empty() ? 0 : views.front().points.size(); }
};

struct KeypointSet3D {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;

  KeypointSet3D() = default;
  explicit KeypointSet3D(std::size_t n) : points(n, Vec3::Zero()), valid(n, 0) {}
  std::size_t size() const { return points.size(); }
  std::size_t valid_count() const;
  static KeypointSet3D all_valid(std::span<const Vec3> pts);
};

inline constexpr double kConfidenceFloor = 0.3;

// Confidence-weighted DLT per joint over views whose keypoint is inside the
// image with confidence >= floor. Joints seen by fewer than `min_views` such
// views (or triangulating behind a camera) come back invalid.
KeypointSet3D triangulate(const KeypointSet2D& kps, std::size_t min_views = 2, double confidence_floor = kConfidenceFloor);

// Pixel residuals of valid joints reprojected into every view that passed the
// floor; RMS over all such observations (0 when there are none).
double reprojection_rms(const KeypointSet2D& kps, const KeypointSet3D& pts, double confidence_floor = kConfidenceFloor);

struct LimitLoss {
  double value = 0.0;
  Eigen::VectorXd grad;  // per articulation DOF
};

// Sum over DOFs of the squared one-sided limit violation.
LimitLoss limit_loss(const Pose& pose, const SkeletonDef& skel);

struct IkOptions {
  double lambda = 1.0;
  double lr = 0.001;
  int iterations = 2000;
  // Stop once every valid joint is within this distance of its target
  // (0 disables early stopping).
  double tolerance = 0.0;
};

struct IkResult {
  Pose pose;               // best-loss iterate
  double loss = 0.0;       // at `pose`
  double initial_loss = 0.0;
  double max_error = 0.0;  // largest valid-joint distance at `pose`
  int iterations = 0;      // optimizer steps taken
};

// Minimizes sum |FK(joint) - target|^2 + lambda * limit loss with Adam over
// [angles, world rotation increment, translation].
IkResult ik_solve(const SkeletonDef& skel, const KeypointSet3D& target, const Pose& init, const IkOptions& opts = {});

struct OneEuroParams {
  double min_cutoff = 1.0;  // Hz
  double beta = 0.007;
  double d_cutoff = 1.0;    // Hz
  double rate = 120.0;      // Hz, nominal sample rate

  void validate() const;
};

struct OneEuroState {
  OneEuroParams params;
  Eigen::VectorXd value;  // previous filtered value
  Eigen::VectorXd deriv;  // previous filtered derivative
  double time = 0.0;
  bool initialized = false;
};

// Adaptive low-pass step. The first sample passes through unchanged.
Eigen::VectorXd one_euro_filter(OneEuroState& state, const Eigen::VectorXd& sample, double timestamp);

// Filters the articulation angles of a pose sequence sampled at `rate` Hz.
std::vector<Pose> smooth_poses(std::span<const Pose> poses, const OneEuroParams& params = {});

// Length of bone b = distance between the averaged positions of joint b and
// joint parent(b). Root entry is 0.
std::vector<double> estimate_bone_lengths(std::span<const KeypointSet3D> frames, const SkeletonDef& skel);

// {"views":[{"cam":"<path>","kp":[[u,v,conf],...]}]}; camera paths are
// relative to the keypoint file.
KeypointSet2D load_keypoints_2d(const std::filesystem::path& path);
void save_keypoints_2d(const KeypointSet2D& kps, std::span<const std::string> camera_paths,
                       const std::filesystem::path& path);

// {"kp3d":[[x,y,z],...],"valid":[...]}
KeypointSet3D parse_keypoints_3d(const std::string& json_text);
KeypointSet3D load_keypoints_3d(const std::filesystem::path& path);
std::string keypoints_3d_to_json(const KeypointSet3D& kps);

}  // namespace gsg
