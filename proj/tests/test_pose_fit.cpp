#include "gsgrasp/fileio.hpp"
#include "gsgrasp/camera.hpp"
#include "gsgrasp/pose_fit.hpp"
#include "gsgrasp/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace gsg;
using namespace testutil;

namespace {

std::vector<Camera> ring_cameras(int n, double radius) {
  std::vector<Camera> cams;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    const Vec3 eye(radius * std::cos(a), 0.2 * radius * ((k % 2) ? 1.0 : -1.0), radius * std::sin(a));
    cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3::UnitY(), 600.0, 640, 480));
  }
  return cams;
}

KeypointSet2D observe(const std::vector<Camera>& cams, const std::vector<Vec3>& pts, double noise,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, noise);
  KeypointSet2D k;
  for (const Camera& c : cams) {
    KeypointView v;
    v.camera = c;
    for (const Vec3& p : pts) {
      const Vec2 uv = *c.project(p);
      v.points.push_back({uv + (noise > 0 ? Vec2(n(rng), n(rng)) : Vec2::Zero()), 1.0});
    }
    k.views.push_back(v);
  }
  return k;
}

KeypointSet3D rest_targets(const SkeletonDef& skel, const Pose& pose) {
  return KeypointSet3D::all_valid(joint_positions(skel, forward_kinematics(skel, pose)));
}

// Peak |output| over the last two seconds of a 10 s sine, relative to amplitude.
double sine_gain(double freq, double amplitude) {
  OneEuroState st;
  double peak = 0.0;
  const int n = 1200;
  for (int k = 0; k < n; ++k) {
    const double t = k / 120.0;
    Eigen::VectorXd x(1);
    x[0] = amplitude * std::sin(2.0 * std::numbers::pi * freq * t);
    const double y = one_euro_filter(st, x, t)[0];
    if (k >= n - 240) peak = std::max(peak, std::abs(y));
  }
  return peak / amplitude;
}

}  // namespace

TEST_CASE("triangulate") {
  std::mt19937_64 rng(51);
  SUBCASE("two exact views recover the point") {
    const auto cams = ring_cameras(2, 1.0);
    const std::vector<Vec3> pts{Vec3(0.01, -0.02, 0.03), Vec3(-0.04, 0.05, 0.0)};
    const KeypointSet3D got = triangulate(observe(cams, pts, 0.0, rng));
    REQUIRE(got.valid_count() == 2);
    for (std::size_t j = 0; j < pts.size(); ++j) CHECK((got.points[j] - pts[j]).norm() < 1e-8);
  }
  SUBCASE("single valid view leaves the joint invalid") {
    const auto cams = ring_cameras(3, 1.0);
    KeypointSet2D k = observe(cams, {Vec3::Zero(), Vec3(0.02, 0, 0)}, 0.0, rng);
    k.views[1].points[0].confidence = 0.1;
    k.views[2].points[0].confidence = 0.29;
    const KeypointSet3D got = triangulate(k);
    CHECK_FALSE(got.valid[0]);
    CHECK(got.valid[1]);
    CHECK(triangulate(k, 4).valid_count() == 0);
  }
  SUBCASE("out-of-image keypoints are ignored") {
    const auto cams = ring_cameras(2, 1.0);
    KeypointSet2D k = observe(cams, {Vec3::Zero()}, 0.0, rng);
    k.views[0].points[0].uv = Vec2(-5.0, 10.0);
    CHECK(triangulate(k).valid_count() == 0);
  }
  SUBCASE("eight noisy views on a 1 m ring") {
    const auto cams = ring_cameras(8, 1.0);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    double se = 0.0, reproj = 0.0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
      const Vec3 p(u(rng), u(rng), u(rng));
      const KeypointSet2D k = observe(cams, {p}, 0.5, rng);
      const KeypointSet3D got = triangulate(k);
      REQUIRE(got.valid[0]);
      se += (got.points[0] - p).squaredNorm();
      reproj += reprojection_rms(k, got);
    }
    CHECK(std::sqrt(se / trials) < 2e-3);
    // Residuals are 2D distances; the injected 2D noise has RMS 0.5 * sqrt(2) px.
    CHECK(reproj / trials <= 0.5 * std::sqrt(2.0));
  }
  SUBCASE("exact observations reproject with zero residual") {
    const auto cams = ring_cameras(5, 1.0);
    const KeypointSet2D k = observe(cams, {Vec3(0.03, 0.01, -0.02)}, 0.0, rng);
    CHECK(reprojection_rms(k, triangulate(k)) < 1e-6);
  }
  KeypointSet2D nocam = observe(ring_cameras(2, 1.0), {Vec3::Zero()}, 0.0, rng);
  nocam.views[1].camera.reset();
  CHECK_THROWS_AS(triangulate(nocam), InvalidArgument);
}

TEST_CASE("limit_loss") {
  const SkeletonDef skel = load_skeleton(default_skeleton_path());
  Pose p = Pose::rest(skel);
  for (std::size_t d = 0; d < skel.dof_count(); ++d)
    p.angles[static_cast<Eigen::Index>(d)] = 0.5 * (skel.dofs()[d].lo + skel.dofs()[d].hi);
  const LimitLoss in = limit_loss(p, skel);
  CHECK(in.value == 0.0);
  CHECK(in.grad.isZero());

  Pose over = p;
  over.angles[0] = skel.dofs()[0].hi + 0.1;
  CHECK(limit_loss(over, skel).value == doctest::Approx(0.01).epsilon(1e-12));
  // Continuous at the boundary.
  over.angles[0] = skel.dofs()[0].hi;
  CHECK(limit_loss(over, skel).value == 0.0);

  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Pose q = Pose::rest(skel);
    double want = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(skel.dof_count()));
    for (std::size_t d = 0; d < skel.dof_count(); ++d) {
      const auto& dof = skel.dofs()[d];
      const double a = dof.lo + (dof.hi - dof.lo) * (0.5 + u(rng));
      q.angles[static_cast<Eigen::Index>(d)] = a;
      if (a > dof.hi) {
        want += (a - dof.hi) * (a - dof.hi);
        g[static_cast<Eigen::Index>(d)] = 2.0 * (a - dof.hi);
      } else if (a < dof.lo) {
        want += (dof.lo - a) * (dof.lo - a);
        g[static_cast<Eigen::Index>(d)] = -2.0 * (dof.lo - a);
      }
    }
    const LimitLoss l = limit_loss(q, skel);
    REQUIRE(std::abs(l.value - want) <= 1e-12 * std::max(1.0, want));
    REQUIRE((l.grad - g).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((l.value == 0.0) == (want == 0.0));
  }
  Pose bad = p;
  bad.angles.resize(3);
  CHECK_THROWS_AS(limit_loss(bad, skel), DimensionError);
}

TEST_CASE("ik_solve") {
  const SkeletonDef finger = two_bone_finger_skeleton();
  const SkeletonDef hand = load_skeleton(default_skeleton_path());

  SUBCASE("rest targets are already optimal") {
    const Pose rest = Pose::rest(hand);
    const IkResult r = ik_solve(hand, rest_targets(hand, rest), rest);
    CHECK(r.loss == 0.0);
    CHECK(r.iterations == 0);
    CHECK(r.pose.angles == rest.angles);
    CHECK(r.pose.translation == rest.translation);
  }
  SUBCASE("returned loss never exceeds the initial loss") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const IkResult r = ik_solve(hand, rest_targets(hand, random_pose_in_limits(hand, s)), Pose::rest(hand),
                                  {.iterations = 50});
      CHECK(r.loss <= r.initial_loss);
      CHECK(r.loss < r.initial_loss);
    }
  }
  SUBCASE("cold start converges given enough iterations") {
    const double target = 1e-3 * finger.rest_extent();
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Pose truth = random_pose_in_limits(finger, 100 + s);
      const IkResult r = ik_solve(finger, rest_targets(finger, truth), Pose::rest(finger),
                                  {.iterations = 40000, .tolerance = target});
      CHECK(r.max_error <= target);
    }
  }
  SUBCASE("warm start from a nearby pose converges quickly") {
    const Pose truth = random_pose_in_limits(hand, 7);
    Pose init = truth;
    init.angles.array() += 0.02;
    init.translation += Vec3(0.002, -0.001, 0.0);
    const IkResult r = ik_solve(hand, rest_targets(hand, truth), init, {.iterations = 500, .tolerance = 1e-3 * hand.rest_extent()});
    CHECK(r.max_error <= 1e-3 * hand.rest_extent());
    CHECK(r.iterations < 500);
  }
  SUBCASE("invalid joints are excluded") {
    const Pose truth = random_pose_in_limits(hand, 9);
    KeypointSet3D t = rest_targets(hand, truth);
    for (std::size_t j = 10; j < t.size(); ++j) {
      t.valid[j] = 0;
      t.points[j] = Vec3(std::nan(""), 0, 0);
    }
    CHECK(std::isfinite(ik_solve(hand, t, Pose::rest(hand), {.iterations = 20}).loss));
  }
  KeypointSet3D few = rest_targets(finger, Pose::rest(finger));
  few.valid[0] = 0;
  CHECK_THROWS_AS(ik_solve(finger, few, Pose::rest(finger)), ComputationError);
  CHECK_THROWS_AS(ik_solve(hand, rest_targets(finger, Pose::rest(finger)), Pose::rest(hand)), DimensionError);
}

TEST_CASE("one_euro_filter") {
  SUBCASE("constant input passes through") {
    OneEuroState st;
    Eigen::VectorXd x(3);
    x << 0.25, -7.0, 3e4;
    for (int k = 0; k < 500; ++k) REQUIRE(one_euro_filter(st, x, k / 120.0) == x);
  }
  SUBCASE("first sample is returned unchanged") {
    OneEuroState st;
    Eigen::VectorXd x(2);
    x << 1.5, -2.5;
    CHECK(one_euro_filter(st, x, 3.0) == x);
    CHECK(st.initialized);
  }
  SUBCASE("sine response at 120 Hz sampling") {
    // Angles in degrees-scale units; see sine_gain for the measurement.
    CHECK(sine_gain(0.5, 10.0) >= 0.95);
    CHECK(sine_gain(30.0, 10.0) <= 0.3);
    // Pure low-pass regime (tiny amplitude): first-order response at 1 Hz cutoff.
    CHECK(sine_gain(0.5, 1e-4) == doctest::Approx(1.0 / std::sqrt(1.0 + 0.25)).epsilon(0.02));
  }
  SUBCASE("subsampling changes the output only slightly") {
    OneEuroState full, half;
    double dev = 0.0;
    for (int k = 0; k < 1200; ++k) {
      const double t = k / 120.0;
      Eigen::VectorXd x(1);
      x[0] = 10.0 * std::sin(2.0 * std::numbers::pi * 0.5 * t);
      const double a = one_euro_filter(full, x, t)[0];
      if (k % 2 != 0) continue;
      const double b = one_euro_filter(half, x, t)[0];
      if (k >= 240) dev = std::max(dev, std::abs(a - b));
    }
    // Measured 0.058 of the amplitude once past the start-up transient.
    CHECK(dev < 0.1 * 10.0);
  }
  OneEuroState st;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  one_euro_filter(st, x, 1.0);
  CHECK_THROWS_AS(one_euro_filter(st, x, 1.0), InvalidArgument);
  CHECK_THROWS_AS(one_euro_filter(st, x, 0.5), InvalidArgument);
  CHECK_THROWS_AS(one_euro_filter(st, Eigen::VectorXd::Zero(3), 2.0), DimensionError);
  OneEuroParams bad;
  bad.min_cutoff = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("smooth_poses") {
  const SkeletonDef finger = two_bone_finger_skeleton();
  std::vector<Pose> seq(30, random_pose_in_limits(finger, 3));
  const auto out = smooth_poses(seq);
  REQUIRE(out.size() == seq.size());
  for (std::size_t f = 0; f < out.size(); ++f) CHECK(out[f].angles == seq[f].angles);
}

TEST_CASE("estimate_bone_lengths") {
  const SkeletonDef hand = load_skeleton(default_skeleton_path());
  const auto rest_lengths = hand.bone_lengths();
  SUBCASE("single frame") {
    const auto pts = joint_positions(hand, forward_kinematics(hand, random_pose_in_limits(hand, 4)));
    const std::vector<KeypointSet3D> frames{KeypointSet3D::all_valid(pts)};
    const auto len = estimate_bone_lengths(frames, hand);
    for (std::size_t b = 0; b < hand.bone_count(); ++b) {
      const int p = hand.bones()[b].parent;
      CHECK(len[b] == (p < 0 ? 0.0 : (pts[b] - pts[static_cast<std::size_t>(p)]).norm()));
    }
  }
  SUBCASE("repeated rest frames give the rest lengths") {
    const std::vector<KeypointSet3D> frames(7, rest_targets(hand, Pose::rest(hand)));
    const auto len = estimate_bone_lengths(frames, hand);
    for (std::size_t b = 0; b < hand.bone_count(); ++b) CHECK(std::abs(len[b] - rest_lengths[b]) < 1e-9);
  }
  SUBCASE("averaging suppresses 5 mm noise") {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> n(0.0, 0.005);
    const KeypointSet3D rest = rest_targets(hand, Pose::rest(hand));
    std::vector<KeypointSet3D> frames;
    for (int f = 0; f < 200; ++f) {
      KeypointSet3D k = rest;
      for (auto& p : k.points) p += Vec3(n(rng), n(rng), n(rng));
      frames.push_back(k);
    }
    const auto len = estimate_bone_lengths(frames, hand);
    double se = 0.0;
    for (std::size_t b = 1; b < hand.bone_count(); ++b) se += (len[b] - rest_lengths[b]) * (len[b] - rest_lengths[b]);
    CHECK(std::sqrt(se / static_cast<double>(hand.bone_count() - 1)) < 1e-3);
  }
  SUBCASE("invalid joints only count where valid") {
    std::vector<KeypointSet3D> frames(2, rest_targets(hand, Pose::rest(hand)));
    frames[0].valid[5] = 0;
    frames[0].points[5] += Vec3(1, 1, 1);
    const auto len = estimate_bone_lengths(frames, hand);
    CHECK(std::abs(len[5] - rest_lengths[5]) < 1e-12);
    frames[1].valid[5] = 0;
    try {
      estimate_bone_lengths(frames, hand);
      FAIL("expected an error");
    } catch (const ComputationError& e) {
      CHECK(std::string(e.what()).find(hand.bones()[5].name) != std::string::npos);
    }
  }
  CHECK_THROWS_AS(estimate_bone_lengths({}, hand), InvalidArgument);
}

TEST_CASE("keypoint files") {
  const auto dir = temp_dir("keypoints");
  std::mt19937_64 rng(54);
  const auto cams = ring_cameras(2, 1.0);
  std::vector<std::string> cam_paths;
  for (std::size_t c = 0; c < cams.size(); ++c) {
    cam_paths.push_back("cam" + std::to_string(c) + ".json");
    write_text_file(dir / cam_paths.back(), camera_to_json(cams[c]));
  }
  KeypointSet2D k = observe(cams, {Vec3(0.01, 0, 0), Vec3(0, 0.02, 0)}, 0.3, rng);
  k.views[1].points[0].confidence = 0.4;
  save_keypoints_2d(k, cam_paths, dir / "kp.json");
  const KeypointSet2D back = load_keypoints_2d(dir / "kp.json");
  REQUIRE(back.views.size() == 2);
  for (std::size_t v = 0; v < 2; ++v) {
    REQUIRE(back.views[v].camera.has_value());
    CHECK(back.views[v].camera->world_to_camera.isApprox(cams[v].world_to_camera, 1e-12));
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(back.views[v].points[j].uv == k.views[v].points[j].uv);
      CHECK(back.views[v].points[j].confidence == k.views[v].points[j].confidence);
    }
  }

  KeypointSet3D k3(3);
  k3.points = {Vec3(0.1, 0.2, 0.3), Vec3(-1e-7, 2.5, 0), Vec3::Zero()};
  k3.valid = {1, 0, 1};
  const KeypointSet3D r3 = parse_keypoints_3d(keypoints_3d_to_json(k3));
  CHECK(r3.points == k3.points);
  CHECK(r3.valid == k3.valid);
  CHECK(parse_keypoints_3d(R"({"kp3d":[[1,2,3]]})").valid_count() == 1);
  CHECK_THROWS_AS(parse_keypoints_3d(R"({"kp3d":[[1,2]]})"), ParseError);
  CHECK_THROWS_AS(parse_keypoints_3d("nope"), ParseError);
  CHECK_THROWS_AS(load_keypoints_2d(dir / "absent.json"), IoError);
}
