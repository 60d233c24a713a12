// Acceptance runner: one PASS/FAIL line per criterion. Usage: acceptance <path to gsgrasp CLI> [criteria...]
#include "gsgrasp/contact.hpp"
#include "gsgrasp/fileio.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"
#include "gsgrasp/kinematics.hpp"
#include "gsgrasp/losses.hpp"
#include "gsgrasp/metrics.hpp"
#include "gsgrasp/pose_fit.hpp"
#include "gsgrasp/rasterizer.hpp"
#include "gsgrasp/skinning.hpp"
#include "gsgrasp/synthetic.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace gsg;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string cli_path;
fs::path work;

int run_cli(const std::string& args, const std::string& log_name) {
  const fs::path log = work / (log_name + ".log");
  const std::string cmd = cli_path + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) std::fprintf(stderr, "command failed (%d): %s\n%s", code, cmd.c_str(), read_text_file(log).c_str());
  return code;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> tree_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_text_file(e.path());
  return out;
}

// ---- 1: rasterizer gradients against central differences

Camera fd_camera() { return Camera::look_at(Vec3(0, 0, 0.3), Vec3::Zero(), Vec3::UnitY(), 8.0, 8, 8, 0.01, 10.0); }

// Broad Gaussians covering the whole 8x8 image with separated depths, so the
// image is smooth in every parameter and no probe reorders the splats.
GaussianCloud fd_scene(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ls(-2.0, -1.4);
  std::normal_distribution<double> nrm(0.0, 1.0);
  GaussianCloud c;
  c.sh_degree = 3;
  std::vector<double> sh(48);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 48; ++k) sh[static_cast<std::size_t>(k)] = (k < 3 ? 0.6 : 0.04) * u(rng);
    const Vec3 pos(0.02 * u(rng), 0.02 * u(rng), 0.03 * (i - 2) + 0.005 * u(rng));
    c.push_back(pos, Quat(nrm(rng), nrm(rng), nrm(rng), nrm(rng)).normalized(), Vec3(ls(rng), ls(rng), ls(rng)),
                u(rng), sh);
  }
  return c;
}

Outcome criterion_gradients() {
  const Camera cam = fd_camera();
  const double h = 1e-4;
  double worst = 0.0;
  std::size_t compared = 0;
  std::array<std::size_t, 5> per_kind{};  // position, rotation, log-scale, opacity, sh
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(9000 + seed);
    const int n = 1 + static_cast<int>(seed % 5);
    GaussianCloud c = fd_scene(n, rng);
    Image w(8, 8, 3);
    std::uniform_real_distribution<double> uw(0.5, 1.5);
    for (double& v : w.data) v = uw(rng);
    auto loss = [&](const GaussianCloud& g) {
      const Image img = render(g, {}, cam, Vec3::Zero()).color;
      double s = 0.0;
      for (std::size_t k = 0; k < img.data.size(); ++k) s += w.data[k] * img.data[k];
      return s;
    };
    const RenderResult r = render(c, {}, cam, Vec3::Zero());
    const RenderGradients g = render_backward(r.cache, c, {}, w);

    std::vector<std::pair<double*, double>> probes;
    std::vector<int> kind;
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (int a = 0; a < 3; ++a) probes.emplace_back(&c.positions[i][a], g.positions[i][a]), kind.push_back(0);
      double* q4[4] = {&c.rotations[i].w(), &c.rotations[i].x(), &c.rotations[i].y(), &c.rotations[i].z()};
      for (int a = 0; a < 4; ++a) probes.emplace_back(q4[a], g.rotations[i][a]), kind.push_back(1);
      for (int a = 0; a < 3; ++a) probes.emplace_back(&c.log_scales[i][a], g.log_scales[i][a]), kind.push_back(2);
      probes.emplace_back(&c.opacity_logits[i], g.opacity_logits[i]), kind.push_back(3);
    }
    for (std::size_t k = 0; k < c.sh.size(); ++k) probes.emplace_back(&c.sh[k], g.sh[k]), kind.push_back(4);

    for (std::size_t k = 0; k < probes.size(); ++k) {
      double* p = probes[k].first;
      const double keep = *p;
      *p = keep + h;
      const double up = loss(c);
      *p = keep - h;
      const double down = loss(c);
      *p = keep;
      const double fd = (up - down) / (2.0 * h);
      const double a = probes[k].second;
      // Relative error, with an absolute floor for gradients that are zero up to rounding.
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      worst = std::max(worst, rel);
      ++compared;
      ++per_kind[static_cast<std::size_t>(kind[k])];
    }
  }
  const bool all_kinds = std::all_of(per_kind.begin(), per_kind.end(), [](std::size_t v) { return v > 0; });
  return {worst < 1e-3 && all_kinds,
          fmt("max rel err %.3g over %zu parameters in 100 scenes (pos %zu, rot %zu, log-scale %zu, opacity %zu, sh %zu)",
              worst, compared, per_kind[0], per_kind[1], per_kind[2], per_kind[3], per_kind[4])};
}

// ---- 2: contact grid vs brute force

GaussianCloud random_points(std::size_t n, double half, const Vec3& center, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaussianCloud c;
  c.sh_degree = 0;
  const double sh[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    c.push_back(center + half * Vec3(u(rng), u(rng), u(rng)), Quat::Identity(), Vec3::Constant(-5.0), 0.0, sh);
  return c;
}

Outcome criterion_contact() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  std::uniform_real_distribution<double> half(0.005, 0.05), off(-0.02, 0.02);
  std::size_t mismatches = 0, contacts = 0;
  for (int t = 0; t < 1000; ++t) {
    const double hh = half(rng);
    const GaussianCloud a = random_points(size(rng), hh, Vec3::Zero(), rng);
    const GaussianCloud b = random_points(size(rng), hh, Vec3(off(rng), off(rng), off(rng)), rng);
    const ContactMap g = instantaneous_contact(a, b, kDefaultTau);
    const ContactMap f = instantaneous_contact_brute(a, b, kDefaultTau);
    const bool same = g.hand_contact == f.hand_contact && g.object_contact == f.object_contact &&
                      g.hand_distance == f.hand_distance && g.object_distance == f.object_distance;
    mismatches += !same;
    contacts += g.hand_count();
  }
  return {mismatches == 0, fmt("%zu of 1000 instances differ (tau %.3g m, %zu hand contacts in total)", mismatches,
                               kDefaultTau, contacts)};
}

// ---- 3: LBS rigidity

Outcome criterion_rigidity() {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ls(-6.0, -3.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  double pos_err = 0.0, cov_err = 0.0;
  bool identity_exact = true;
  for (int t = 0; t < 1000; ++t) {
    GaussianCloud c;
    c.sh_degree = 0;
    const double sh[3] = {0.1, 0.2, 0.3};
    for (int i = 0; i < 16; ++i)
      c.push_back(0.1 * Vec3(u(rng), u(rng), u(rng)), Quat(nrm(rng), nrm(rng), nrm(rng), nrm(rng)).normalized(),
                  Vec3(ls(rng), ls(rng), ls(rng)), u(rng), sh, i % 4);
    BoneTransforms bones;
    for (int b = 0; b < 4; ++b) {
      const Mat3 r = Quat(nrm(rng), nrm(rng), nrm(rng), nrm(rng)).normalized().toRotationMatrix();
      Mat4 m = Mat4::Identity();
      m.topLeftCorner<3, 3>() = r;
      m.topRightCorner<3, 1>() = 0.2 * Vec3(u(rng), u(rng), u(rng));
      bones.transforms.push_back(m);
      bones.rotations.push_back(r);
    }
    std::vector<Blend> blends;
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::vector<double> w(4, 0.0);
      w[static_cast<std::size_t>(c.bone_ids[i])] = 1.0;
      blends.push_back(blend_transforms(w, bones));
    }
    const GaussianCloud p = apply_blends(c, blends);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto b = static_cast<std::size_t>(c.bone_ids[i]);
      const Mat3& r = bones.rotations[b];
      const Vec3 want = r * c.positions[i] + bones.transforms[b].topRightCorner<3, 1>();
      pos_err = std::max(pos_err, (p.positions[i] - want).cwiseAbs().maxCoeff());
      cov_err = std::max(cov_err, (p.covariance(i) - r * c.covariance(i) * r.transpose()).cwiseAbs().maxCoeff());
    }

    const BoneTransforms id = BoneTransforms::identity(4);
    std::vector<Blend> id_blends;
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::vector<double> w(4, 0.0);
      w[static_cast<std::size_t>(c.bone_ids[i])] = 1.0;
      id_blends.push_back(blend_transforms(w, id));
    }
    const GaussianCloud q = apply_blends(c, id_blends);
    for (std::size_t i = 0; i < c.size(); ++i)
      identity_exact = identity_exact && q.positions[i] == c.positions[i] &&
                       q.rotations[i].coeffs() == c.rotations[i].coeffs() && q.log_scales[i] == c.log_scales[i];
    identity_exact = identity_exact && q.opacity_logits == c.opacity_logits && q.sh == c.sh;
  }
  return {pos_err <= 1e-9 && cov_err <= 1e-9 && identity_exact,
          fmt("1000 cases: max |mu_p - (R mu + t)| %.3g, max |Sigma_p - R Sigma R^T| %.3g, identity %s", pos_err,
              cov_err, identity_exact ? "exact" : "NOT exact")};
}

// ---- 4, 5, 6 and 10: pipeline runs through the CLI

struct PipelineRun {
  bool ok = false;
  double seconds = 0.0;
};

PipelineRun timed_cli(const std::string& args, const std::string& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli(args, log);
  return {code == 0, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
}

struct Pipelines {
  bool prepared = false;
  PipelineRun hand, object, grasp, evaluate;
};
Pipelines pipes;

const std::uint64_t kSeed = 7;

void synth(const std::string& scene, const fs::path& out) {
  run_cli("synth --scene " + scene + " --seed " + std::to_string(kSeed) + " --out " + q(out), "synth_" + scene);
}

Outcome criterion_hand_fit() {
  synth("two-bone-finger", work / "finger");
  pipes.hand = timed_cli("train-hand --manifest " + q(work / "finger" / "manifest.json") + " --seed " +
                             std::to_string(kSeed) + " --out " + q(work / "hand_a"),
                         "train_hand");
  if (!pipes.hand.ok) return {false, "train-hand failed"};
  const json rep = json::parse(read_text_file(work / "hand_a" / "report.json"));
  const double p = rep["final_psnr"].get<double>();
  const auto steps = rep["optimizer_steps"].get<int>();
  return {p > 30.0 && pipes.hand.seconds < 900.0,
          fmt("mean train-view PSNR %.2f dB after %d iterations (%d optimizer steps), %.0f s", p,
              static_cast<int>(rep["loss_curve"].size()), steps, pipes.hand.seconds)};
}

Outcome criterion_object_fit() {
  synth("textured-sphere", work / "sphere");
  pipes.object = timed_cli("train-object --manifest " + q(work / "sphere" / "manifest.json") + " --seed " +
                               std::to_string(kSeed) + " --out " + q(work / "object_a"),
                           "train_object");
  if (!pipes.object.ok) return {false, "train-object failed"};
  const json rep = json::parse(read_text_file(work / "object_a" / "report.json"));
  const double p = rep["final_psnr"].get<double>();
  const auto outside = rep["outside_masks"].get<std::size_t>();
  return {p > 30.0 && outside == 0 && pipes.object.seconds < 600.0,
          fmt("mean train-view PSNR %.2f dB, %zu of %zu Gaussians outside masks, %.0f s", p, outside,
              rep["gaussians"].get<std::size_t>(), pipes.object.seconds)};
}

Outcome criterion_grasp() {
  synth("grasp-toy", work / "toy");
  pipes.grasp = timed_cli("grasp --manifest " + q(work / "toy" / "manifest.json") + " --out " + q(work / "grasp_a"),
                          "grasp");
  if (!pipes.grasp.ok) return {false, "grasp failed"};
  const json got = json::parse(read_text_file(work / "grasp_a" / "contact.json"));
  const json truth = json::parse(read_text_file(work / "toy" / "truth" / "contact.json"));
  const bool sets_equal = got["hand_touched"] == truth["hand"] && got["object_touched"] == truth["object"];

  pipes.evaluate = timed_cli("evaluate --pred " + q(work / "grasp_a" / "masks") + " --gt " + q(work / "toy" / "truth") +
                                 " --out " + q(work / "eval_a"),
                             "evaluate");
  if (!pipes.evaluate.ok) return {false, "evaluate failed"};
  const json ev = json::parse(read_text_file(work / "eval_a" / "evaluation.json"));
  double min_iou = 1.0;
  for (const auto& v : ev["views"]) min_iou = std::min(min_iou, v["iou"].get<double>());
  const double miou = ev["mean_iou"].get<double>();
  const double secs = pipes.grasp.seconds + pipes.evaluate.seconds;
  return {sets_equal && miou > 0.9 && secs < 300.0,
          fmt("contact sets %s truth (%zu hand, %zu object), mIoU %.4f (min view %.4f) over %zu views, %.0f s",
              sets_equal ? "equal" : "DIFFER from", truth["hand"].size(), truth["object"].size(), miou, min_iou,
              ev["views"].size(), secs)};
}

Outcome criterion_determinism() {
  std::vector<std::string> diffs;
  auto compare = [&](const fs::path& a, const fs::path& b, const std::string& what) {
    if (!fs::exists(a) || !fs::exists(b)) {
      diffs.push_back(what + " missing");
      return;
    }
    if (tree_contents(a) != tree_contents(b)) diffs.push_back(what);
  };
  synth("two-bone-finger", work / "finger_b");
  synth("textured-sphere", work / "sphere_b");
  synth("grasp-toy", work / "toy_b");
  compare(work / "finger", work / "finger_b", "finger scene");
  compare(work / "sphere", work / "sphere_b", "sphere scene");
  compare(work / "toy", work / "toy_b", "grasp-toy scene");

  run_cli("train-hand --manifest " + q(work / "finger" / "manifest.json") + " --seed " + std::to_string(kSeed) +
              " --out " + q(work / "hand_b"),
          "train_hand_b");
  run_cli("train-object --manifest " + q(work / "sphere" / "manifest.json") + " --seed " + std::to_string(kSeed) +
              " --out " + q(work / "object_b"),
          "train_object_b");
  run_cli("grasp --manifest " + q(work / "toy" / "manifest.json") + " --out " + q(work / "grasp_b"), "grasp_b");
  run_cli("evaluate --pred " + q(work / "grasp_b" / "masks") + " --gt " + q(work / "toy" / "truth") + " --out " +
              q(work / "eval_b"),
          "evaluate_b");
  compare(work / "hand_a", work / "hand_b", "train-hand output");
  compare(work / "object_a", work / "object_b", "train-object output");
  compare(work / "grasp_a", work / "grasp_b", "grasp output");
  compare(work / "eval_a", work / "eval_b", "evaluate output");
  std::string d;
  for (const auto& s : diffs) d += (d.empty() ? "" : ", ") + s;
  return {diffs.empty(), diffs.empty() ? "synthetic scenes and hand/object/grasp/evaluate outputs are bit-identical"
                                       : "differences: " + d};
}

// ---- 7: inverse kinematics

KeypointSet3D targets_for(const SkeletonDef& skel, const Pose& pose) {
  return KeypointSet3D::all_valid(joint_positions(skel, forward_kinematics(skel, pose)));
}

Outcome criterion_ik() {
  const SkeletonDef hand = load_skeleton(default_skeleton_path());
  const double target = 1e-3 * hand.rest_extent();
  const IkOptions cold{.lambda = 1.0, .lr = 0.001, .iterations = 2000, .tolerance = target};

  int cold_ok = 0;
  double cold_worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Pose truth = random_pose_in_limits(hand, 700 + s);
    const IkResult r = ik_solve(hand, targets_for(hand, truth), Pose::rest(hand), cold);
    cold_ok += r.max_error <= target;
    cold_worst = std::max(cold_worst, r.max_error / hand.rest_extent());
  }

  // Smooth motion: 50 frames easing between two random in-limit poses with a
  // drifting wrist. Frame 0 is solved without a budget cap; every later frame
  // starts from the previous solution with a quarter of the cold budget.
  const Pose from = random_pose_in_limits(hand, 801), to = random_pose_in_limits(hand, 802);
  const int frames = 50, warm_budget = cold.iterations / 4;
  IkOptions first = cold;
  first.iterations = 100000;
  Pose prev = Pose::rest(hand);
  int warm_ok = 0, warm_max_iters = 0;
  bool first_ok = false;
  for (int f = 0; f < frames; ++f) {
    const double s = static_cast<double>(f) / (frames - 1);
    const double e = s * s * (3.0 - 2.0 * s);
    Pose truth = from;
    truth.angles = (1.0 - e) * from.angles + e * to.angles;
    truth.translation = Vec3(0.02 * e, -0.01 * e, 0.015 * e);
    truth.rotation = Quat(Eigen::AngleAxisd(0.3 * e, Vec3::UnitY()));
    IkOptions o = cold;
    o.iterations = f == 0 ? first.iterations : warm_budget;
    const IkResult r = ik_solve(hand, targets_for(hand, truth), prev, o);
    prev = r.pose;
    if (f == 0) {
      first_ok = r.max_error <= target;
      continue;
    }
    warm_ok += r.max_error <= target;
    warm_max_iters = std::max(warm_max_iters, r.iterations);
  }
  const bool cold_pass = cold_ok == 50, warm_pass = first_ok && warm_ok == frames - 1;
  return {cold_pass && warm_pass,
          fmt("cold start (lr 0.001, lambda 1, 2000 iterations): %d/50 within %.3g m (worst %.3g of hand scale); "
              "warm start: %d/%d frames within target using at most %d of %d iterations",
              cold_ok, target, cold_worst, warm_ok, frames - 1, warm_max_iters, warm_budget)};
}

// ---- 8: one-euro filter

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

Outcome criterion_filter() {
  bool constant_exact = true;
  for (double c : {0.0, 0.37, -12.5, 1e3}) {
    OneEuroState st;
    Eigen::VectorXd x = Eigen::VectorXd::Constant(3, c);
    for (int k = 0; k < 1200; ++k) constant_exact = constant_exact && one_euro_filter(st, x, k / 120.0) == x;
  }
  const double amp = 10.0;
  const double lo = sine_gain(0.5, amp), hi = sine_gain(30.0, amp);
  return {constant_exact && lo >= 0.95 && hi <= 0.3,
          fmt("constants %s; amplitude %.0f sines at 120 Hz: 0.5 Hz gain %.4f, 30 Hz gain %.4f",
              constant_exact ? "pass exactly" : "are NOT preserved", amp, lo, hi)};
}

// ---- 9: metric identities

Outcome criterion_metrics() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double pa = p(rng), pb = p(rng);
    std::bernoulli_distribution ba(pa), bb(pb);
    Mask a(31, 23), b(31, 23);
    for (auto& v : a.data) v = ba(rng);
    for (auto& v : b.data) v = bb(rng);
    const double i = iou(a, b), f = f1(a, b);
    worst = std::max(worst, std::abs(f - 2.0 * i / (1.0 + i)));
  }
  auto iso = [](const std::vector<Vec3>& scales) {
    GaussianCloud c;
    c.sh_degree = 0;
    const double sh[3] = {0, 0, 0};
    for (const auto& s : scales) c.push_back(Vec3::Zero(), Quat::Identity(), s.array().log(), 0.0, sh);
    return loss_iso(c, 0.4).value;
  };
  const double at1 = iso({Vec3(0.01, 0.01, 0.01), Vec3(0.3, 0.3, 0.3)});
  const double at04 = iso({Vec3(0.4, 1.0, 0.7), Vec3(0.02, 0.05, 0.03)});
  const bool iso_ok = std::abs(at1 - 0.36) <= 1e-15 && std::abs(at04) <= 1e-15;
  return {worst < 1e-12 && iso_ok, fmt("max |F1 - 2 IoU/(1+IoU)| %.3g over 1000 random pairs; iso loss %.17g at ratio 1, "
                                       "%.3g at ratio 0.4",
                                       worst, at1, at04)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <gsgrasp CLI> [criterion numbers...]\n", argv[0]);
    return 2;
  }
  cli_path = argv[1];
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  work = fs::temp_directory_path() / "gsgrasp_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", criterion_gradients},
      {"contact oracle equivalence", criterion_contact},
      {"LBS rigidity", criterion_rigidity},
      {"synthetic hand fit", criterion_hand_fit},
      {"synthetic object fit", criterion_object_fit},
      {"end-to-end grasp", criterion_grasp},
      {"IK recovery", criterion_ik},
      {"filter behavior", criterion_filter},
      {"metric identities", criterion_metrics},
      {"determinism", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d (%s): %s  %s [%.1f s]\n", id, criteria[k].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
