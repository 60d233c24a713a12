#include "gsgrasp/synthetic.hpp"

#include "gsgrasp/config.hpp"
#include "gsgrasp/fileio.hpp"
#include "gsgrasp/pose_fit.hpp"
#include "gsgrasp/rasterizer.hpp"
#include "gsgrasp/sh.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace gsg {

namespace fs = std::filesystem;

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "two-bone-finger") return SceneKind::TwoBoneFinger;
  if (name == "textured-sphere") return SceneKind::TexturedSphere;
  if (name == "grasp-toy") return SceneKind::GraspToy;
  throw InvalidArgument("unknown scene kind '" + name + "' (two-bone-finger, textured-sphere, grasp-toy)");
}

std::string scene_kind_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::TwoBoneFinger:
      return "two-bone-finger";
    case SceneKind::TexturedSphere:
      return "textured-sphere";
    case SceneKind::GraspToy:
      return "grasp-toy";
  }
  return "?";
}

SkeletonDef two_bone_finger_skeleton() {
  std::vector<Bone> bones(4);
  bones[0].name = "palm";
  bones[1] = {"proximal", 0, Vec3(0.03, 0.0, 0.0), Quat::Identity()};
  bones[2] = {"middle", 1, Vec3(0.03, 0.0, 0.0), Quat::Identity()};
  bones[3] = {"tip", 2, Vec3(0.025, 0.0, 0.0), Quat::Identity()};
  std::vector<DofSpec> dofs = {
      {1, Vec3(0, 0, -1), -0.2, 1.4},
      {1, Vec3(0, 1, 0), -0.3, 0.3},
      {2, Vec3(0, 0, -1), 0.0, 1.5},
  };
  return SkeletonDef(std::move(bones), std::move(dofs), {3});
}

std::vector<Camera> sphere_cameras(int n, const Vec3& target, double radius, int width, int height,
                                   double focal_scale) {
  std::vector<Camera> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    const Vec3 dir(r * std::cos(phi), y, r * std::sin(phi));
    out.push_back(Camera::look_at(target + radius * dir, target, Vec3::UnitY(), focal_scale * width, width, height,
                                  0.01, 10.0));
  }
  return out;
}

Vec3 cameras_focus(const std::vector<Camera>& cams) {
  if (cams.empty()) throw InvalidArgument("no cameras");
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& c : cams) {
    const Vec3 d = c.rotation().row(2).transpose();  // optical axis in world
    const Mat3 p = Mat3::Identity() - d * d.transpose();
    a += p;
    b += p * c.center();
  }
  return a.ldlt().solve(b);
}

GaussianCloud init_object_ball(const Vec3& center, double radius, std::size_t n, std::uint64_t seed,
                               const InitOptions& opts) {
  GaussianCloud cloud;
  cloud.sh_degree = opts.sh_degree;
  cloud.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> coeffs(static_cast<std::size_t>(cloud.sh_count()) * 3, 0.0);
  coeffs[0] = coeffs[1] = coeffs[2] = sh_dc_for(opts.base_gray);
  // Mean spacing of n points in the ball, used as the initial scale.
  const double spacing = radius * std::cbrt(4.0 * std::numbers::pi / (3.0 * std::max<std::size_t>(n, 1)));
  const Vec3 ls = Vec3::Constant(std::log(opts.scale_factor * spacing));
  while (cloud.size() < n) {
    const Vec3 p(uni(rng), uni(rng), uni(rng));
    if (p.squaredNorm() > 1.0) continue;
    cloud.push_back(center + radius * p, Quat::Identity(), ls, logit(opts.initial_opacity), coeffs);
  }
  return cloud;
}

Pose random_pose_in_limits(const SkeletonDef& skel, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Pose p = Pose::rest(skel);
  for (std::size_t k = 0; k < skel.dof_count(); ++k) {
    std::uniform_real_distribution<double> u(skel.dofs()[k].lo, skel.dofs()[k].hi);
    p.angles[static_cast<Eigen::Index>(k)] = u(rng);
  }
  return p;
}

namespace {

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Pushes a primitive whose parameters are exactly representable in the
// float32 PLY file, so truth and reloaded data agree bit for bit.
void push_f32(GaussianCloud& c, const Vec3& p, const Quat& q, const Vec3& ls, double opacity, const Vec3& rgb) {
  const Quat qn = q.normalized();
  const double sh[3] = {f32(sh_dc_for(rgb.x())), f32(sh_dc_for(rgb.y())), f32(sh_dc_for(rgb.z()))};
  c.push_back(Vec3(f32(p.x()), f32(p.y()), f32(p.z())), Quat(f32(qn.w()), f32(qn.x()), f32(qn.y()), f32(qn.z())),
              Vec3(f32(ls.x()), f32(ls.y()), f32(ls.z())), f32(logit(opacity)), sh);
}

// Tube of Gaussians around every parent->child segment of the rest skeleton.
GaussianCloud finger_cloud(const SkeletonDef& skel, std::size_t per_segment, std::mt19937_64& rng) {
  GaussianCloud c;
  c.sh_degree = 0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto& heads = skel.rest_heads();
  const Vec3 tints[] = {Vec3(0.85, 0.55, 0.45), Vec3(0.75, 0.5, 0.55), Vec3(0.9, 0.65, 0.4), Vec3(0.7, 0.6, 0.5)};
  int seg = 0;
  for (std::size_t b = 1; b < skel.bone_count(); ++b) {
    const auto p = static_cast<std::size_t>(skel.bones()[b].parent);
    const Vec3 a = heads[p], e = heads[b];
    const Vec3 axis = (e - a).normalized();
    Vec3 e1 = axis.cross(Vec3::UnitZ());
    if (e1.norm() < 1e-9) e1 = axis.cross(Vec3::UnitY());
    e1.normalize();
    const Vec3 e2 = axis.cross(e1);
    const double radius = 0.008 - 0.001 * seg;
    const double len = (e - a).norm();
    const Vec3 tint = tints[seg % 4];
    for (std::size_t i = 0; i < per_segment; ++i) {
      const double t = u01(rng), th = 2.0 * std::numbers::pi * u01(rng);
      const Vec3 radial = std::cos(th) * e1 + std::sin(th) * e2;
      const Vec3 pos = a + t * (e - a) + radius * radial;
      Mat3 frame;
      frame.col(0) = axis;
      frame.col(1) = radial.cross(axis);
      frame.col(2) = radial;
      const double shade = 0.8 + 0.2 * std::sin(3.0 * th + 40.0 * t * len);
      push_f32(c, pos, Quat(frame), Vec3(std::log(0.003), std::log(0.0025), std::log(0.0012)), 0.9, tint * shade);
    }
    ++seg;
  }
  return c;
}

GaussianCloud sphere_cloud(const Vec3& center, double radius, std::size_t n, double tangent, double normal) {
  GaussianCloud c;
  c.sh_degree = 0;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * static_cast<double>(i);
    const Vec3 d(r * std::cos(phi), y, r * std::sin(phi));
    const double lon = std::atan2(d.z(), d.x()), lat = std::asin(y);
    const Vec3 rgb(0.5 + 0.35 * std::sin(3.0 * lon) * std::cos(2.0 * lat), 0.5 + 0.3 * std::cos(4.0 * lat),
                   0.5 + 0.3 * std::sin(2.0 * lon + 1.0));
    const Quat q = Quat::FromTwoVectors(Vec3::UnitZ(), d);
    push_f32(c, center + radius * d, q, Vec3(std::log(tangent), std::log(tangent), std::log(normal)), 0.95, rgb);
  }
  return c;
}

Mask alpha_mask(const Image& alpha) {
  Mask m(alpha.width, alpha.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = alpha.data[i] >= 0.5 ? 1 : 0;
  return m;
}

std::string numbered(const char* prefix, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03d%s", prefix, i, ext);
  return buf;
}

Pose lerp_pose(const Pose& a, const Pose& b, double t) {
  Pose p = a;
  p.angles = a.angles + t * (b.angles - a.angles);
  return p;
}

struct Writer {
  fs::path dir;
  CaptureManifest m;

  void cameras(const std::vector<Camera>& cams) {
    fs::create_directories(dir / "cams");
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const fs::path p = dir / "cams" / numbered("c", static_cast<int>(i), ".json");
      write_text_file(p, camera_to_json(cams[i]));
      m.cameras.push_back(p);
    }
  }

  fs::path pose(const Pose& pose, const char* sub, int i) {
    fs::create_directories(dir / sub);
    const fs::path p = dir / sub / numbered("p", i, ".json");
    write_text_file(p, pose_to_json(pose));
    return p;
  }

  void frame(const Image& img, const Image& alpha, int cam, int i, const fs::path& pose_path) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    FrameEntry f;
    f.image = dir / "images" / numbered("f", i, ".png");
    f.mask = dir / "masks" / numbered("f", i, ".png");
    f.camera = m.cameras[static_cast<std::size_t>(cam)];
    f.pose = pose_path;
    save_png(img, f.image);
    save_mask_png(alpha_mask(alpha), f.mask);
    m.frames.push_back(f);
  }

  // Exact projections of the joints into every camera, plus the 3D truth.
  void keypoints(const std::vector<Camera>& cams, const std::vector<Vec3>& joints, int t) {
    fs::create_directories(dir / "kp");
    fs::create_directories(dir / "kp3d");
    KeypointSet2D set;
    std::vector<std::string> cam_paths;
    for (std::size_t c = 0; c < cams.size(); ++c) {
      KeypointView v;
      v.camera = cams[c];
      for (const auto& j : joints) {
        const auto uv = cams[c].project(j);
        v.points.push_back({uv.value_or(Vec2(-1e9, -1e9)), uv ? 1.0 : 0.0});
      }
      set.views.push_back(std::move(v));
      cam_paths.push_back("../cams/" + numbered("c", static_cast<int>(c), ".json"));
    }
    const fs::path p = dir / "kp" / numbered("t", t, ".json");
    save_keypoints_2d(set, cam_paths, p);
    write_text_file(dir / "kp3d" / numbered("t", t, ".json"), keypoints_3d_to_json(KeypointSet3D::all_valid(joints)));
    m.keypoints.push_back(p);
  }
};

struct HandAssets {
  SkeletonDef skel;
  GaussianCloud hand;
  SkinningGrid grid;
};

HandAssets write_hand_assets(Writer& w, std::mt19937_64& rng) {
  HandAssets h;
  w.m.skeleton = w.dir / "skeleton.json";
  write_text_file(w.m.skeleton, skeleton_to_json(two_bone_finger_skeleton()));
  h.skel = load_skeleton(w.m.skeleton);

  const GaussianCloud hand = finger_cloud(h.skel, 260, rng);
  w.m.hand = w.dir / "hand.ply";
  save_ply(hand, w.m.hand);
  h.hand = load_ply(w.m.hand);

  // Same grid the training command builds with default settings.
  const RunConfig defaults;
  const WeightedTemplate tmpl = make_segment_template(h.skel, defaults.template_samples);
  save_template(tmpl, w.dir / "template.bin");
  w.m.grid = w.dir / "grid.bin";
  save_grid(build_grid(tmpl, defaults.grid_dims, skeleton_bounds(h.skel, defaults.grid_margin)), w.m.grid);
  h.grid = load_grid(w.m.grid);
  return h;
}

Pose reload_pose(const fs::path& p) { return load_pose(p); }

void make_finger(const SyntheticOptions& o, Writer& w, SyntheticTruth& truth, std::mt19937_64& rng) {
  HandAssets h = write_hand_assets(w, rng);
  const Vec3 center(0.045, 0.0, 0.0);
  truth.cameras = sphere_cameras(o.views, center, 0.17, o.width, o.height);
  w.cameras(truth.cameras);

  std::vector<Pose> poses;
  for (int k = 0; k < std::max(1, o.distinct_poses); ++k) poses.push_back(random_pose_in_limits(h.skel, rng()));
  for (int i = 0; i < o.views; ++i) {
    const fs::path pp = w.pose(poses[static_cast<std::size_t>(i) % poses.size()], "poses", i);
    const Pose pose = reload_pose(pp);
    truth.frame_poses.push_back(pose);
    const PosedCloud posed = pose_cloud(h.hand, h.grid, forward_kinematics(h.skel, pose));
    const RenderResult r = render(posed.cloud, posed.blends, truth.cameras[static_cast<std::size_t>(i)], Vec3::Zero());
    w.frame(r.color, r.alpha, i, i, pp);
  }

  const Pose from = random_pose_in_limits(h.skel, rng()), to = random_pose_in_limits(h.skel, rng());
  for (int t = 0; t < o.sequence_length; ++t) {
    const double s = o.sequence_length > 1 ? static_cast<double>(t) / (o.sequence_length - 1) : 0.0;
    const fs::path pp = w.pose(lerp_pose(from, to, s * s * (3.0 - 2.0 * s)), "seq", t);
    w.m.poses.push_back(pp);
    const Pose pose = reload_pose(pp);
    truth.sequence.push_back(pose);
    truth.sequence_joints.push_back(joint_positions(h.skel, forward_kinematics(h.skel, pose)));
    w.keypoints(truth.cameras, truth.sequence_joints.back(), t);
  }
  truth.skeleton = h.skel;
  truth.hand = h.hand;
  truth.grid = h.grid;
}

void make_sphere(const SyntheticOptions& o, Writer& w, SyntheticTruth& truth) {
  const GaussianCloud obj = sphere_cloud(Vec3::Zero(), 0.04, 1500, 0.0035, 0.0012);
  w.m.object_cloud = w.dir / "object.ply";
  save_ply(obj, w.m.object_cloud);
  truth.object = load_ply(w.m.object_cloud);
  truth.cameras = sphere_cameras(o.views, Vec3::Zero(), 0.25, o.width, o.height);
  w.cameras(truth.cameras);
  for (int i = 0; i < o.views; ++i) {
    const RenderResult r = render(truth.object, {}, truth.cameras[static_cast<std::size_t>(i)], Vec3::Zero());
    w.frame(r.color, r.alpha, i, i, {});
  }
}

// Posed hand by textbook LBS, sum_b w_b (A_b mu + t_b), evaluated
// independently of the pipeline's dominant-bone expansion.
struct OraclePose {
  std::vector<Vec3> positions;
  std::vector<Quat> rotations;
};

OraclePose oracle_pose(const GaussianCloud& hand, const SkinningGrid& grid, const BoneTransforms& bones) {
  OraclePose out;
  for (std::size_t i = 0; i < hand.size(); ++i) {
    const Eigen::VectorXd w = sample_weights(grid, hand.positions[i]);
    Vec3 p = Vec3::Zero();
    Mat3 a = Mat3::Zero();
    for (Eigen::Index b = 0; b < w.size(); ++b) {
      if (w[b] == 0.0) continue;
      const Mat4& t = bones.transforms[static_cast<std::size_t>(b)];
      p += w[b] * (t.topLeftCorner<3, 3>() * hand.positions[i] + t.topRightCorner<3, 1>());
      a += w[b] * t.topLeftCorner<3, 3>();
    }
    out.positions.push_back(p);
    out.rotations.push_back(rotation_quat(polar_rotation(a)) * hand.rotations[i]);
  }
  return out;
}

double min_distance(const std::vector<Vec3>& a, const GaussianCloud& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a)
    for (const auto& q : b.positions) best = std::min(best, (p - q).norm());
  return best;
}

void make_grasp(const SyntheticOptions& o, Writer& w, SyntheticTruth& truth, std::mt19937_64& rng) {
  HandAssets h = write_hand_assets(w, rng);
  const double tau = o.tau;
  Pose open = Pose::rest(h.skel), closed = Pose::rest(h.skel);
  closed.angles << 0.5, 0.05, 0.9;
  const int frames = std::max(1, o.sequence_length);
  std::vector<Pose> seq;
  for (int t = 0; t < frames; ++t)
    seq.push_back(lerp_pose(open, closed, frames > 1 ? static_cast<double>(t) / (frames - 1) : 1.0));
  std::vector<OraclePose> posed;
  for (const auto& p : seq) posed.push_back(oracle_pose(h.hand, h.grid, forward_kinematics(h.skel, p)));

  // Sphere under the middle phalanx at the closed pose, pushed along the palm
  // normal until its closest Gaussian sits at `gap` from the finger.
  const BoneTransforms closed_bones = forward_kinematics(h.skel, closed);
  const auto joints = joint_positions(h.skel, closed_bones);
  const Vec3 mid = 0.5 * (joints[2] + joints[3]);
  const Vec3 normal = closed_bones.rotations[2] * Vec3(0, -1, 0);
  const double radius = 0.02;
  const std::size_t count = 1200;

  GaussianCloud obj;
  bool ok = false;
  for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
    const double gap = tau * (0.45 + 0.01 * attempt);
    double offset = 0.008 + radius + gap;
    for (int k = 0; k < 8; ++k) {
      obj = sphere_cloud(mid + offset * normal, radius, count, 0.002, 0.0008);
      offset += gap - min_distance(posed.back().positions, obj);
    }
    obj = sphere_cloud(mid + offset * normal, radius, count, 0.002, 0.0008);

    // Ground truth by exhaustive search; reject layouts with a nearest
    // distance too close to tau for the comparison to be unambiguous.
    truth.hand_contact.assign(h.hand.size(), 0);
    truth.object_contact.assign(obj.size(), 0);
    ok = true;
    for (const auto& rp : posed) {
      std::vector<double> obj_best(obj.size(), std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < h.hand.size() && ok; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < obj.size(); ++j) {
          const double d = (rp.positions[i] - obj.positions[j]).norm();
          best = std::min(best, d);
          obj_best[j] = std::min(obj_best[j], d);
        }
        if (std::abs(best - tau) < 1e-4 * tau) ok = false;
        if (best < tau) truth.hand_contact[i] = 1;
      }
      for (std::size_t j = 0; j < obj.size() && ok; ++j) {
        if (std::abs(obj_best[j] - tau) < 1e-4 * tau) ok = false;
        if (obj_best[j] < tau) truth.object_contact[j] = 1;
      }
    }
  }
  if (!ok) throw ComputationError("could not place the grasp-toy object with a clean contact margin");

  w.m.object_cloud = w.dir / "object.ply";
  save_ply(obj, w.m.object_cloud);
  truth.object = load_ply(w.m.object_cloud);

  Vec3 lo = truth.object.positions.front(), hi = lo;
  for (const auto& p : posed.back().positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (const auto& p : truth.object.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  truth.cameras = sphere_cameras(o.views, 0.5 * (lo + hi), 0.2, o.width, o.height);
  w.cameras(truth.cameras);

  for (int t = 0; t < frames; ++t) {
    const fs::path pp = w.pose(seq[static_cast<std::size_t>(t)], "seq", t);
    w.m.poses.push_back(pp);
    truth.sequence.push_back(reload_pose(pp));
    truth.sequence_joints.push_back(joint_positions(h.skel, forward_kinematics(h.skel, truth.sequence.back())));
    w.keypoints(truth.cameras, truth.sequence_joints.back(), t);
  }

  // Composed renders at the closed pose and the touching-hand truth masks.
  const PosedCloud hand_posed = pose_cloud(h.hand, h.grid, closed_bones);
  const Concatenated scene = concat(truth.object, hand_posed.cloud);
  GaussianCloud touching;
  touching.sh_degree = 0;
  const OraclePose& last = posed.back();
  for (std::size_t i = 0; i < h.hand.size(); ++i) {
    if (!truth.hand_contact[i]) continue;
    touching.push_back(last.positions[i], last.rotations[i], h.hand.log_scales[i], h.hand.opacity_logits[i],
                       {h.hand.sh_ptr(i), 3});
  }
  fs::create_directories(w.dir / "truth");
  for (int i = 0; i < o.views; ++i) {
    const Camera& cam = truth.cameras[static_cast<std::size_t>(i)];
    const RenderResult r = render(scene.cloud, {}, cam, Vec3::Zero());
    w.frame(r.color, r.alpha, i, i, w.m.poses.back());
    truth.frame_poses.push_back(truth.sequence.back());
    Mask m = touching.empty() ? Mask(cam.width, cam.height) : silhouette_mask(touching, cam);
    save_mask_png(m, w.dir / "truth" / numbered("contact_c", i, ".png"));
    truth.contact_masks.push_back(std::move(m));
  }
  std::string idx = "{\"hand\":[";
  bool first = true;
  for (std::size_t i = 0; i < truth.hand_contact.size(); ++i)
    if (truth.hand_contact[i]) {
      idx += (first ? "" : ",") + std::to_string(i);
      first = false;
    }
  idx += "],\"object\":[";
  first = true;
  for (std::size_t i = 0; i < truth.object_contact.size(); ++i)
    if (truth.object_contact[i]) {
      idx += (first ? "" : ",") + std::to_string(i);
      first = false;
    }
  write_text_file(w.dir / "truth" / "contact.json", idx + "],\"tau\":" + std::to_string(tau) + "}\n");

  truth.skeleton = h.skel;
  truth.hand = h.hand;
  truth.grid = h.grid;
}

}  // namespace

SyntheticScene make_synthetic_scene(const SyntheticOptions& o, const fs::path& dir) {
  if (o.views < 2) throw InvalidArgument("synthetic scenes need at least 2 views");
  if (o.width < 16 || o.height < 16) throw InvalidArgument("synthetic images must be at least 16x16");
  fs::create_directories(dir);
  Writer w;
  w.dir = dir;
  w.m.fps = 30.0;
  w.m.subject = "synthetic";
  std::mt19937_64 rng(o.seed);
  SyntheticScene scene;
  switch (o.kind) {
    case SceneKind::TwoBoneFinger:
      w.m.object = "none";
      make_finger(o, w, scene.truth, rng);
      break;
    case SceneKind::TexturedSphere:
      w.m.object = "textured-sphere";
      make_sphere(o, w, scene.truth);
      break;
    case SceneKind::GraspToy:
      w.m.object = "sphere";
      make_grasp(o, w, scene.truth, rng);
      break;
  }
  scene.manifest_path = dir / "manifest.json";
  save_manifest(w.m, scene.manifest_path);
  scene.manifest = load_manifest(scene.manifest_path);
  return scene;
}

}  // namespace gsg
