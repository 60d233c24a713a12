#include "gsgrasp/kinematics.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace gsg {

using nlohmann::json;

namespace {

Vec3 read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string("expected 3-vector for ") + what);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Quat read_quat(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) throw ParseError(std::string("expected [w,x,y,z] for ") + what);
  Quat q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  if (q.norm() == 0.0) throw ParseError(std::string("zero quaternion for ") + what);
  return q.normalized();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Rigid 4x4 rotating by `r` about the fixed point `pivot`.
Mat4 rotation_about(const Mat3& r, const Vec3& pivot) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = pivot - r * pivot;
  return m;
}

Mat4 global_matrix(const Pose& pose) {
  Mat4 g = Mat4::Identity();
  g.topLeftCorner<3, 3>() = pose.rotation.normalized().toRotationMatrix();
  g.topRightCorner<3, 1>() = pose.translation;
  return g;
}

}  // namespace

SkeletonDef::SkeletonDef(std::vector<Bone> bones, std::vector<DofSpec> dofs, std::vector<int> tips)
    : bones_(std::move(bones)), dofs_(std::move(dofs)), tips_(std::move(tips)) {
  if (bones_.empty()) throw TopologyError("skeleton has no bones");
  int roots = 0;
  for (std::size_t i = 0; i < bones_.size(); ++i) {
    const int p = bones_[i].parent;
    if (p < 0) {
      ++roots;
      if (i != 0) throw TopologyError("bone '" + bones_[i].name + "' is a second root");
    } else if (p >= static_cast<int>(i)) {
      throw TopologyError("bone '" + bones_[i].name + "' has parent index " + std::to_string(p) +
                          " >= own index " + std::to_string(i));
    }
    bones_[i].rest_rot.normalize();
  }
  if (roots != 1) throw TopologyError("skeleton must have exactly one root");

  bone_dofs_.assign(bones_.size(), {});
  for (std::size_t k = 0; k < dofs_.size(); ++k) {
    auto& d = dofs_[k];
    if (d.bone < 0 || d.bone >= static_cast<int>(bones_.size()))
      throw TopologyError("dof " + std::to_string(k) + " references missing bone " + std::to_string(d.bone));
    if (d.axis.norm() == 0.0) throw InvalidArgument("dof " + std::to_string(k) + " has a zero axis");
    d.axis.normalize();
    if (!(d.lo <= d.hi))
      throw LimitError("dof " + std::to_string(k) + " has lower limit " + std::to_string(d.lo) +
                       " > upper limit " + std::to_string(d.hi));
    bone_dofs_[d.bone].push_back(static_cast<int>(k));
  }
  for (int t : tips_) {
    if (t < 0 || t >= static_cast<int>(bones_.size()))
      throw TopologyError("tip references missing bone " + std::to_string(t));
  }

  rest_heads_.resize(bones_.size());
  rest_frames_.resize(bones_.size());
  for (std::size_t i = 0; i < bones_.size(); ++i) {
    const Bone& b = bones_[i];
    if (b.parent < 0) {
      rest_heads_[i] = b.offset;
      rest_frames_[i] = b.rest_rot.toRotationMatrix();
    } else {
      rest_heads_[i] = rest_heads_[b.parent] + rest_frames_[b.parent] * b.offset;
      rest_frames_[i] = rest_frames_[b.parent] * b.rest_rot.toRotationMatrix();
    }
  }
}

bool SkeletonDef::is_ancestor_or_self(int ancestor, int bone) const {
  while (bone >= 0) {
    if (bone == ancestor) return true;
    bone = bones_[bone].parent;
  }
  return false;
}

std::vector<double> SkeletonDef::bone_lengths() const {
  std::vector<double> out(bones_.size(), 0.0);
  for (std::size_t i = 0; i < bones_.size(); ++i)
    if (bones_[i].parent >= 0) out[i] = bones_[i].offset.norm();
  return out;
}

double SkeletonDef::rest_extent() const {
  double best = 0.0;
  for (std::size_t i = 0; i < rest_heads_.size(); ++i)
    for (std::size_t j = i + 1; j < rest_heads_.size(); ++j)
      best = std::max(best, (rest_heads_[i] - rest_heads_[j]).norm());
  return best;
}

Pose Pose::rest(const SkeletonDef& skel) {
  Pose p;
  p.angles = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(skel.dof_count()));
  return p;
}

BoneTransforms BoneTransforms::identity(std::size_t bones) {
  BoneTransforms t;
  t.transforms.assign(bones, Mat4::Identity());
  t.rotations.assign(bones, Mat3::Identity());
  return t;
}

SkeletonDef parse_skeleton(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("skeleton: ") + e.what());
  }
  try {
    std::vector<Bone> bones;
    for (const auto& jb : j.at("bones")) {
      Bone b;
      b.name = jb.value("name", std::string{});
      const auto& jp = jb.at("parent");
      b.parent = jp.is_null() ? -1 : jp.get<int>();
      b.offset = read_vec3(jb.at("offset"), "offset");
      if (jb.contains("rest_rot")) b.rest_rot = read_quat(jb.at("rest_rot"), "rest_rot");
      bones.push_back(std::move(b));
    }
    std::vector<DofSpec> dofs;
    if (j.contains("dofs")) {
      for (const auto& jd : j.at("dofs")) {
        DofSpec d;
        d.bone = jd.at("bone").get<int>();
        d.axis = read_vec3(jd.at("axis"), "axis");
        d.lo = jd.at("lo").get<double>();
        d.hi = jd.at("hi").get<double>();
        dofs.push_back(d);
      }
    }
    std::vector<int> tips;
    if (j.contains("tips")) tips = j.at("tips").get<std::vector<int>>();
    return SkeletonDef(std::move(bones), std::move(dofs), std::move(tips));
  } catch (const json::exception& e) {
    throw ParseError(std::string("skeleton: ") + e.what());
  }
}

SkeletonDef load_skeleton(const std::filesystem::path& path) {
  return parse_skeleton(read_file(path));
}

std::string skeleton_to_json(const SkeletonDef& skel) {
  json j;
  j["bones"] = json::array();
  for (const auto& b : skel.bones()) {
    json jb;
    jb["name"] = b.name;
    jb["parent"] = b.parent < 0 ? json(nullptr) : json(b.parent);
    jb["offset"] = {b.offset.x(), b.offset.y(), b.offset.z()};
    jb["rest_rot"] = {b.rest_rot.w(), b.rest_rot.x(), b.rest_rot.y(), b.rest_rot.z()};
    j["bones"].push_back(jb);
  }
  j["dofs"] = json::array();
  for (const auto& d : skel.dofs())
    j["dofs"].push_back({{"bone", d.bone}, {"axis", {d.axis.x(), d.axis.y(), d.axis.z()}}, {"lo", d.lo}, {"hi", d.hi}});
  j["tips"] = skel.tips();
  return j.dump(1);
}

Pose parse_pose(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    Pose p;
    const auto angles = j.at("angles").get<std::vector<double>>();
    p.angles = Eigen::Map<const Eigen::VectorXd>(angles.data(), static_cast<Eigen::Index>(angles.size()));
    if (j.contains("rot")) p.rotation = read_quat(j.at("rot"), "rot");
    if (j.contains("trans")) p.translation = read_vec3(j.at("trans"), "trans");
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("pose: ") + e.what());
  }
}

Pose load_pose(const std::filesystem::path& path) { return parse_pose(read_file(path)); }

std::string pose_to_json(const Pose& pose) {
  json j;
  j["angles"] = std::vector<double>(pose.angles.data(), pose.angles.data() + pose.angles.size());
  j["rot"] = {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z()};
  j["trans"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  return j.dump();
}

void check_pose(const SkeletonDef& skel, const Pose& pose) {
  if (static_cast<std::size_t>(pose.angles.size()) != skel.dof_count())
    throw DimensionError("pose has " + std::to_string(pose.angles.size()) + " angles, skeleton has " +
                         std::to_string(skel.dof_count()) + " dofs");
}

BoneTransforms forward_kinematics(const SkeletonDef& skel, const Pose& pose) {
  check_pose(skel, pose);
  const std::size_t n = skel.bone_count();
  BoneTransforms out;
  out.transforms.resize(n);
  out.rotations.resize(n);
  const Mat4 global = global_matrix(pose);
  for (std::size_t b = 0; b < n; ++b) {
    // Joint rotation expressed in the rest world frame, about the rest head.
    Mat3 r = Mat3::Identity();
    for (int k : skel.bone_dofs(b)) {
      const Vec3 axis = skel.rest_frames()[b] * skel.dofs()[k].axis;
      r = r * Eigen::AngleAxisd(pose.angles[k], axis).toRotationMatrix();
    }
    const Mat4 local = rotation_about(r, skel.rest_heads()[b]);
    const int p = skel.bones()[b].parent;
    out.transforms[b] = (p < 0 ? global : out.transforms[p]) * local;
    out.rotations[b] = out.transforms[b].topLeftCorner<3, 3>();
  }
  return out;
}

std::vector<Vec3> joint_positions(const SkeletonDef& skel, const BoneTransforms& transforms) {
  if (transforms.size() != skel.bone_count())
    throw DimensionError("bone transform count does not match skeleton");
  std::vector<Vec3> out(skel.bone_count());
  for (std::size_t b = 0; b < out.size(); ++b) {
    const Mat4& t = transforms.transforms[b];
    out[b] = t.topLeftCorner<3, 3>() * skel.rest_heads()[b] + t.topRightCorner<3, 1>();
  }
  return out;
}

SkeletonDef scale_bone_lengths(const SkeletonDef& skel, std::span<const double> lengths) {
  if (lengths.size() != skel.bone_count())
    throw DimensionError("expected one length per bone");
  std::vector<Bone> bones = skel.bones();
  for (std::size_t b = 0; b < bones.size(); ++b) {
    if (bones[b].parent < 0) continue;
    if (!(lengths[b] > 0.0))
      throw InvalidArgument("bone '" + bones[b].name + "' has non-positive length " + std::to_string(lengths[b]));
    const double cur = bones[b].offset.norm();
    if (cur == 0.0) throw InvalidArgument("bone '" + bones[b].name + "' has zero rest offset; direction undefined");
    if (cur != lengths[b]) bones[b].offset *= lengths[b] / cur;
  }
  return SkeletonDef(std::move(bones), skel.dofs(), skel.tips());
}

Eigen::MatrixXd fk_jacobian(const SkeletonDef& skel, const Pose& pose) {
  const BoneTransforms tf = forward_kinematics(skel, pose);
  const std::vector<Vec3> joints = joint_positions(skel, tf);
  const auto nj = static_cast<Eigen::Index>(joints.size());
  const auto nd = static_cast<Eigen::Index>(skel.dof_count());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * nj, nd + 6);

  for (std::size_t b = 0; b < skel.bone_count(); ++b) {
    const int p = skel.bones()[b].parent;
    const Mat3 parent_rot = p < 0 ? pose.rotation.normalized().toRotationMatrix() : tf.rotations[p];
    const Vec3& pivot = joints[b];
    Mat3 accum = Mat3::Identity();  // rotations of earlier DOFs on this bone
    for (int k : skel.bone_dofs(b)) {
      const Vec3 rest_axis = skel.rest_frames()[b] * skel.dofs()[k].axis;
      const Vec3 w = parent_rot * accum * rest_axis;
      for (Eigen::Index j = 0; j < nj; ++j) {
        if (!skel.is_ancestor_or_self(static_cast<int>(b), static_cast<int>(j))) continue;
        jac.block<3, 1>(3 * j, k) = w.cross(joints[j] - pivot);
      }
      accum = accum * Eigen::AngleAxisd(pose.angles[k], rest_axis).toRotationMatrix();
    }
  }
  for (Eigen::Index j = 0; j < nj; ++j) {
    const Vec3 rel = joints[j] - pose.translation;
    for (int a = 0; a < 3; ++a) jac.block<3, 1>(3 * j, nd + a) = Vec3::Unit(a).cross(rel);
    jac.block<3, 3>(3 * j, nd + 3) = Mat3::Identity();
  }
  return jac;
}

Quat apply_rotation_increment(const Quat& q, const Vec3& delta) {
  const double angle = delta.norm();
  if (angle == 0.0) return q;
  return (Quat(Eigen::AngleAxisd(angle, delta / angle)) * q).normalized();
}

std::filesystem::path default_skeleton_path() {
  return std::filesystem::path(GSGRASP_DATA_DIR) / "skeleton_hand21.json";
}

}  // namespace gsg
