#pragma once

#include "gsgrasp/common.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gsg {

struct Bone {
  std::string name;
  int parent = -1;       // -1 for the root
  Vec3 offset = Vec3::Zero();  // head position in the parent frame, meters
  Quat rest_rot = Quat::Identity();
};

// One articulation degree of freedom: rotation about a fixed axis expressed in
// the owning bone's local frame. Multiple DOFs on one bone compose in order.
struct DofSpec {
  int bone = 0;
  Vec3 axis = Vec3::UnitZ();
  double lo = 0.0;
  double hi = 0.0;
};

class SkeletonDef {
 public:
  SkeletonDef() = default;
  // Validates and precomputes the rest configuration. Throws TopologyError,
  // LimitError or InvalidArgument.
  SkeletonDef(std::vector<Bone> bones, std::vector<DofSpec> dofs, std::vector<int> tips);

  const std::vector<Bone>& bones() const { return bones_; }
  const std::vector<DofSpec>& dofs() const { return dofs_; }
  const std::vector<int>& tips() const { return tips_; }

  std::size_t bone_count() const { return bones_.size(); }
  std::size_t dof_count() const { return dofs_.size(); }

  // Rest-pose (canonical) world position of each bone head.
  const std::vector<Vec3>& rest_heads() const { return rest_heads_; }
  // Rest-pose world orientation of each bone frame.
  const std::vector<Mat3>& rest_frames() const { return rest_frames_; }
  // DOF indices owned by each bone, in composition order.
  const std::vector<int>& bone_dofs(std::size_t bone) const { return bone_dofs_[bone]; }

  // True when `ancestor` is `bone` or lies on its parent chain.
  bool is_ancestor_or_self(int ancestor, int bone) const;

  // |offset| per bone; 0 for the root.
  std::vector<double> bone_lengths() const;

  // Largest distance between two rest joint positions; used as "hand scale".
  double rest_extent() const;

 private:
  std::vector<Bone> bones_;
  std::vector<DofSpec> dofs_;
  std::vector<int> tips_;
  std::vector<Vec3> rest_heads_;
  std::vector<Mat3> rest_frames_;
  std::vector<std::vector<int>> bone_dofs_;
};

struct Pose {
  Eigen::VectorXd angles;
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose rest(const SkeletonDef& skel);
};

// Per-bone rigid maps from canonical (rest) space to posed space.
struct BoneTransforms {
  std::vector<Mat4> transforms;
  std::vector<Mat3> rotations;

  std::size_t size() const { return transforms.size(); }
  static BoneTransforms identity(std::size_t bones);
};

SkeletonDef load_skeleton(const std::filesystem::path& path);
SkeletonDef parse_skeleton(const std::string& json_text);
std::string skeleton_to_json(const SkeletonDef& skel);

Pose load_pose(const std::filesystem::path& path);
Pose parse_pose(const std::string& json_text);
std::string pose_to_json(const Pose& pose);

// Throws DimensionError when the pose does not match the skeleton.
void check_pose(const SkeletonDef& skel, const Pose& pose);

BoneTransforms forward_kinematics(const SkeletonDef& skel, const Pose& pose);

// One point per bone head, posed.
std::vector<Vec3> joint_positions(const SkeletonDef& skel, const BoneTransforms& transforms);

// `lengths` holds one entry per bone; the root entry is ignored.
SkeletonDef scale_bone_lengths(const SkeletonDef& skel, std::span<const double> lengths);

// Column layout: [articulation DOFs..., world rotation (3), translation (3)].
// Rotation columns differentiate q -> exp(delta) * q.
Eigen::MatrixXd fk_jacobian(const SkeletonDef& skel, const Pose& pose);

// Applies a world-frame rotation increment: q <- exp(delta) * q.
Quat apply_rotation_increment(const Quat& q, const Vec3& delta);

// Shipped 21-bone / 26-DOF hand.
std::filesystem::path default_skeleton_path();

}  // namespace gsg
