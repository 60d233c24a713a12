#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/contact.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/kinematics.hpp"
#include "gsgrasp/scene_io.hpp"
#include "gsgrasp/skinning.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gsg {

enum class SceneKind { TwoBoneFinger, TexturedSphere, GraspToy };

SceneKind parse_scene_kind(const std::string& name);
std::string scene_kind_name(SceneKind kind);

struct SyntheticOptions {
  SceneKind kind = SceneKind::TwoBoneFinger;
  int views = 20;
  int width = 128;
  int height = 128;
  std::uint64_t seed = 1;
  int sequence_length = 12;  // poses in the motion sequence
  int distinct_poses = 4;    // training poses cycled over the views
  double tau = kDefaultTau;
};

// Everything the generator knows but the pipeline must recover.
struct SyntheticTruth {
  SkeletonDef skeleton;
  GaussianCloud hand;    // canonical, as stored on disk
  GaussianCloud object;  // world space, as stored on disk
  SkinningGrid grid;
  std::vector<Camera> cameras;
  std::vector<Pose> frame_poses;  // one per training frame
  std::vector<Pose> sequence;     // motion sequence
  std::vector<std::vector<Vec3>> sequence_joints;
  // Grasp toy: union over the sequence of Gaussians within tau of the other
  // cloud, and per-camera masks of the touching hand Gaussians at the last pose.
  std::vector<std::uint8_t> hand_contact;
  std::vector<std::uint8_t> object_contact;
  std::vector<Mask> contact_masks;
};

struct SyntheticScene {
  std::filesystem::path manifest_path;
  CaptureManifest manifest;
  SyntheticTruth truth;
};

// Writes a complete capture (manifest, cameras, PNG images and masks, poses,
// keypoints, clouds, skinning grid) under `dir`. Identical options give
// byte-identical files.
SyntheticScene make_synthetic_scene(const SyntheticOptions& opts, const std::filesystem::path& dir);

// Palm plus two articulated phalanges and a tip: 4 joints, 3 DOF.
SkeletonDef two_bone_finger_skeleton();

// `n` cameras on a Fibonacci sphere of `radius` around `target`, all looking
// at it. The focal length is `focal_scale` times the image width.
std::vector<Camera> sphere_cameras(int n, const Vec3& target, double radius, int width, int height,
                                   double focal_scale = 1.2);

// Least-squares point closest to every camera's optical axis.
Vec3 cameras_focus(const std::vector<Camera>& cams);

// Ball of `n` random Gaussians (gray, low opacity) used to start object fits.
GaussianCloud init_object_ball(const Vec3& center, double radius, std::size_t n, std::uint64_t seed,
                               const InitOptions& opts = {});

// Uniformly random pose inside every DOF limit (global transform = identity).
Pose random_pose_in_limits(const SkeletonDef& skel, std::uint64_t seed);

}  // namespace gsg
