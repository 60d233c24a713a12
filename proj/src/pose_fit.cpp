#include "gsgrasp/pose_fit.hpp"

#include "gsgrasp/adam.hpp"
#include "gsgrasp/fileio.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace gsg {

using nlohmann::json;

std::size_t KeypointSet3D::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid) n += v != 0;
  return n;
}

KeypointSet3D KeypointSet3D::all_valid(std::span<const Vec3> pts) {
  KeypointSet3D k(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    k.points[i] = pts[i];
    k.valid[i] = 1;
  }
  return k;
}

namespace {

bool usable(const Camera& cam, const Keypoint2D& kp, double floor) {
  if (!(kp.confidence >= floor) || kp.confidence > 1.0) return false;
  if (!kp.uv.allFinite()) return false;
  // Pixel centers sit at integer coordinates; the image spans [-0.5, w-0.5).
  return kp.uv.x() >= -0.5 && kp.uv.x() < cam.width - 0.5 && kp.uv.y() >= -0.5 && kp.uv.y() < cam.height - 0.5;
}

void check_views(const KeypointSet2D& kps) {
  const std::size_t j = kps.joint_count();
  for (std::size_t v = 0; v < kps.views.size(); ++v) {
    if (!kps.views[v].camera) throw InvalidArgument("keypoint view " + std::to_string(v) + " has no camera");
    if (kps.views[v].points.size() != j)
      throw DimensionError("keypoint view " + std::to_string(v) + " has " +
                           std::to_string(kps.views[v].points.size()) + " joints, expected " + std::to_string(j));
  }
}

}  // namespace

KeypointSet3D triangulate(const KeypointSet2D& kps, std::size_t min_views, double confidence_floor) {
  check_views(kps);
  const std::size_t joints = kps.joint_count();
  const std::size_t need = std::max<std::size_t>(2, min_views);
  std::vector<Eigen::Matrix<double, 3, 4>> proj;
  for (const auto& v : kps.views) proj.push_back(v.camera->projection_matrix());

  KeypointSet3D out(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    std::vector<Eigen::RowVector4d> rows;
    std::vector<std::size_t> used;
    for (std::size_t v = 0; v < kps.views.size(); ++v) {
      const Keypoint2D& kp = kps.views[v].points[j];
      if (!usable(*kps.views[v].camera, kp, confidence_floor)) continue;
      used.push_back(v);
      const auto& p = proj[v];
      for (const Eigen::RowVector4d& r : {Eigen::RowVector4d(kp.uv.x() * p.row(2) - p.row(0)),
                                         Eigen::RowVector4d(kp.uv.y() * p.row(2) - p.row(1))}) {
        const double n = r.norm();
        rows.push_back(n > 0.0 ? Eigen::RowVector4d(r * (kp.confidence / n)) : r);
      }
    }
    if (used.size() < need) continue;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t r = 0; r < rows.size(); ++r) a.row(static_cast<Eigen::Index>(r)) = rows[r];
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::Vector4d h = svd.matrixV().col(3);
    if (std::abs(h[3]) < 1e-300) continue;
    const Vec3 x = h.head<3>() / h[3];
    if (!x.allFinite()) continue;
    bool in_front = true;
    for (std::size_t v : used) in_front = in_front && kps.views[v].camera->to_camera(x).z() > 0.0;
    if (!in_front) continue;
    out.points[j] = x;
    out.valid[j] = 1;
  }
  return out;
}

double reprojection_rms(const KeypointSet2D& kps, const KeypointSet3D& pts, double confidence_floor) {
  check_views(kps);
  if (pts.size() != kps.joint_count()) throw DimensionError("3D keypoint count does not match the 2D set");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& view : kps.views) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (!pts.valid[j] || !usable(*view.camera, view.points[j], confidence_floor)) continue;
      const auto uv = view.camera->project(pts.points[j]);
      if (!uv) continue;
      sum += (*uv - view.points[j].uv).squaredNorm();
      ++n;
    }
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

LimitLoss limit_loss(const Pose& pose, const SkeletonDef& skel) {
  check_pose(skel, pose);
  LimitLoss out;
  out.grad = Eigen::VectorXd::Zero(pose.angles.size());
  for (std::size_t k = 0; k < skel.dof_count(); ++k) {
    const double a = pose.angles[static_cast<Eigen::Index>(k)];
    const auto& d = skel.dofs()[k];
    if (a > d.hi) {
      out.value += (a - d.hi) * (a - d.hi);
      out.grad[static_cast<Eigen::Index>(k)] = 2.0 * (a - d.hi);
    } else if (a < d.lo) {
      out.value += (d.lo - a) * (d.lo - a);
      out.grad[static_cast<Eigen::Index>(k)] = -2.0 * (d.lo - a);
    }
  }
  return out;
}

namespace {

struct IkEval {
  double loss = 0.0;
  double max_error = 0.0;
  Eigen::VectorXd grad;  // [angles, rotation increment, translation]
};

IkEval ik_eval(const SkeletonDef& skel, const KeypointSet3D& target, const Pose& pose, double lambda) {
  const auto joints = joint_positions(skel, forward_kinematics(skel, pose));
  const Eigen::MatrixXd jac = fk_jacobian(skel, pose);
  const auto nd = static_cast<Eigen::Index>(skel.dof_count());
  IkEval e;
  e.grad = Eigen::VectorXd::Zero(nd + 6);
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (!target.valid[j]) continue;
    const Vec3 r = joints[j] - target.points[j];
    e.loss += r.squaredNorm();
    e.max_error = std::max(e.max_error, r.norm());
    e.grad += 2.0 * jac.middleRows<3>(static_cast<Eigen::Index>(3 * j)).transpose() * r;
  }
  if (lambda != 0.0) {
    const LimitLoss lim = limit_loss(pose, skel);
    e.loss += lambda * lim.value;
    e.grad.head(nd) += lambda * lim.grad;
  }
  return e;
}

}  // namespace

IkResult ik_solve(const SkeletonDef& skel, const KeypointSet3D& target, const Pose& init, const IkOptions& opts) {
  check_pose(skel, init);
  if (target.size() != skel.bone_count())
    throw DimensionError("target has " + std::to_string(target.size()) + " joints, skeleton has " +
                         std::to_string(skel.bone_count()));
  if (target.valid_count() < 4)
    throw ComputationError("inverse kinematics needs at least 4 valid joints, got " +
                           std::to_string(target.valid_count()));
  if (!(opts.lr > 0.0) || opts.iterations < 0 || !(opts.lambda >= 0.0))
    throw InvalidArgument("invalid inverse kinematics options");
  for (std::size_t j = 0; j < target.size(); ++j)
    if (target.valid[j] && !target.points[j].allFinite()) throw InvalidArgument("non-finite target joint");

  const auto nd = static_cast<Eigen::Index>(skel.dof_count());
  Pose cur = init;
  cur.rotation.normalize();
  IkEval e = ik_eval(skel, target, cur, opts.lambda);
  IkResult best{cur, e.loss, e.loss, e.max_error, 0};
  AdamState state(static_cast<std::size_t>(nd + 6));
  Eigen::VectorXd params(nd + 6);

  for (int it = 0; it < opts.iterations; ++it) {
    if (best.loss == 0.0 || (opts.tolerance > 0.0 && best.max_error <= opts.tolerance)) break;
    params.head(nd) = cur.angles;
    params.segment<3>(nd).setZero();
    params.tail<3>() = cur.translation;
    adam_step({params.data(), static_cast<std::size_t>(params.size())},
              {e.grad.data(), static_cast<std::size_t>(e.grad.size())}, state, opts.lr);
    cur.angles = params.head(nd);
    cur.rotation = apply_rotation_increment(cur.rotation, params.segment<3>(nd));
    cur.translation = params.tail<3>();
    best.iterations = it + 1;

    e = ik_eval(skel, target, cur, opts.lambda);
    if (!std::isfinite(e.loss)) throw ComputationError("inverse kinematics diverged");
    if (e.loss < best.loss) {
      best.pose = cur;
      best.loss = e.loss;
      best.max_error = e.max_error;
    }
  }
  return best;
}

void OneEuroParams::validate() const {
  if (!(min_cutoff > 0.0 && d_cutoff > 0.0 && rate > 0.0 && beta >= 0.0))
    throw InvalidArgument("one-euro filter needs positive cutoffs and rate, beta >= 0");
}

namespace {

double smoothing_alpha(double cutoff, double dt) {
  const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff);
  return 1.0 / (1.0 + tau / dt);
}

}  // namespace

Eigen::VectorXd one_euro_filter(OneEuroState& s, const Eigen::VectorXd& sample, double timestamp) {
  s.params.validate();
  if (!s.initialized) {
    s.value = sample;
    s.deriv = Eigen::VectorXd::Zero(sample.size());
    s.time = timestamp;
    s.initialized = true;
    return sample;
  }
  if (sample.size() != s.value.size()) throw DimensionError("one-euro sample size changed");
  if (!(timestamp > s.time))
    throw InvalidArgument("one-euro timestamps must increase (" + std::to_string(timestamp) + " after " +
                          std::to_string(s.time) + ")");
  const double dt = timestamp - s.time;
  const double ad = smoothing_alpha(s.params.d_cutoff, dt);
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const double dx = (sample[i] - s.value[i]) / dt;
    // Incremental form so a constant input stays bit-exact.
    s.deriv[i] += ad * (dx - s.deriv[i]);
    const double cutoff = s.params.min_cutoff + s.params.beta * std::abs(s.deriv[i]);
    const double a = smoothing_alpha(cutoff, dt);
    s.value[i] += a * (sample[i] - s.value[i]);
  }
  s.time = timestamp;
  return s.value;
}

std::vector<Pose> smooth_poses(std::span<const Pose> poses, const OneEuroParams& params) {
  params.validate();
  OneEuroState st;
  st.params = params;
  std::vector<Pose> out(poses.begin(), poses.end());
  for (std::size_t f = 0; f < out.size(); ++f)
    out[f].angles = one_euro_filter(st, poses[f].angles, static_cast<double>(f) / params.rate);
  return out;
}

std::vector<double> estimate_bone_lengths(std::span<const KeypointSet3D> frames, const SkeletonDef& skel) {
  if (frames.empty()) throw InvalidArgument("bone length estimation needs at least one frame");
  const std::size_t n = skel.bone_count();
  std::vector<Vec3> sum(n, Vec3::Zero());
  std::vector<std::size_t> count(n, 0);
  for (const auto& f : frames) {
    if (f.size() != n) throw DimensionError("keypoint frame does not match the skeleton joint count");
    for (std::size_t j = 0; j < n; ++j)
      if (f.valid[j]) {
        sum[j] += f.points[j];
        ++count[j];
      }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    const int p = skel.bones()[b].parent;
    if (p < 0) continue;
    for (std::size_t j : {static_cast<std::size_t>(p), b})
      if (count[j] == 0)
        throw ComputationError("bone '" + skel.bones()[b].name + "': joint " + std::to_string(j) +
                               " is never valid");
    out[b] = (sum[b] / static_cast<double>(count[b]) - sum[p] / static_cast<double>(count[p])).norm();
  }
  return out;
}

KeypointSet2D load_keypoints_2d(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  KeypointSet2D out;
  try {
    const json j = json::parse(text);
    for (const auto& jv : j.at("views")) {
      KeypointView v;
      if (jv.contains("cam") && !jv.at("cam").is_null()) {
        std::filesystem::path cp = jv.at("cam").get<std::string>();
        if (cp.is_relative()) cp = path.parent_path() / cp;
        v.camera = load_camera(cp);
      }
      for (const auto& kp : jv.at("kp")) {
        if (!kp.is_array() || kp.size() != 3) throw ParseError("keypoint entries must be [u, v, conf]");
        v.points.push_back({Vec2(kp[0].get<double>(), kp[1].get<double>()), kp[2].get<double>()});
      }
      out.views.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return out;
}

void save_keypoints_2d(const KeypointSet2D& kps, std::span<const std::string> camera_paths,
                       const std::filesystem::path& path) {
  if (camera_paths.size() != kps.views.size()) throw DimensionError("one camera path per keypoint view expected");
  json j;
  j["views"] = json::array();
  for (std::size_t v = 0; v < kps.views.size(); ++v) {
    json jv;
    jv["cam"] = camera_paths[v];
    jv["kp"] = json::array();
    for (const auto& kp : kps.views[v].points) jv["kp"].push_back({kp.uv.x(), kp.uv.y(), kp.confidence});
    j["views"].push_back(jv);
  }
  write_text_file(path, j.dump());
}

KeypointSet3D parse_keypoints_3d(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    KeypointSet3D k;
    for (const auto& p : j.at("kp3d")) {
      if (!p.is_array() || p.size() != 3) throw ParseError("kp3d entries must be [x, y, z]");
      k.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    if (j.contains("valid")) {
      for (const auto& v : j.at("valid")) k.valid.push_back(v.is_boolean() ? v.get<bool>() : v.get<int>() != 0);
      if (k.valid.size() != k.points.size()) throw ParseError("kp3d and valid lengths differ");
    } else {
      k.valid.assign(k.points.size(), 1);
    }
    return k;
  } catch (const json::exception& e) {
    throw ParseError(std::string("3D keypoints: ") + e.what());
  }
}

KeypointSet3D load_keypoints_3d(const std::filesystem::path& path) { return parse_keypoints_3d(read_text_file(path)); }

std::string keypoints_3d_to_json(const KeypointSet3D& kps) {
  json j;
  j["kp3d"] = json::array();
  j["valid"] = json::array();
  for (std::size_t i = 0; i < kps.size(); ++i) {
    j["kp3d"].push_back({kps.points[i].x(), kps.points[i].y(), kps.points[i].z()});
    j["valid"].push_back(kps.valid[i] != 0);
  }
  return j.dump();
}

}  // namespace gsg
