#include "gsgrasp/losses.hpp"
#include "gsgrasp/metrics.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace gsg;
using namespace testutil;

namespace {

Mask columns(int w, int h, int x0, int x1) {
  Mask m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = x0; x < x1; ++x) m.at(x, y) = 1;
  return m;
}

Mask random_mask(int w, int h, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  Mask m(w, h);
  for (auto& v : m.data) v = b(rng);
  return m;
}

}  // namespace

TEST_CASE("psnr") {
  std::mt19937_64 rng(61);
  const Image a = random_image(12, 9, 3, rng), b = random_image(12, 9, 3, rng);
  CHECK(psnr(a, a) == 99.0);
  CHECK(psnr(Image(8, 8, 3, 0.3), Image(8, 8, 3, 0.4)) == doctest::Approx(20.0).epsilon(1e-12));

  double mse = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) mse += (a.data[k] - b.data[k]) * (a.data[k] - b.data[k]);
  mse /= static_cast<double>(a.data.size());
  CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) < 1e-6);
  CHECK(psnr(a, b) == psnr(b, a));

  // Monotone in noise amplitude.
  const Image base(16, 16, 3, 0.5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> pattern(base.data.size());
  for (double& v : pattern) v = u(rng);
  double prev = 100.0;
  for (double amp : {0.001, 0.003, 0.01, 0.03, 0.1, 0.3}) {
    Image noisy = base;
    for (std::size_t k = 0; k < pattern.size(); ++k) noisy.data[k] += amp * pattern[k];
    const double p = psnr(base, noisy);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(psnr(a, Image(12, 8, 3)), DimensionError);
}

TEST_CASE("ssim_metric") {
  std::mt19937_64 rng(62);
  const Image a = random_image(20, 16, 3, rng), b = random_image(20, 16, 3, rng);
  CHECK(ssim_metric(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(ssim_metric(a, b) - (1.0 - loss_ssim(a, b).value)) < 1e-12);
  CHECK(std::abs(ssim_metric(a, b) - ssim_metric(b, a)) < 1e-12);
  Image neg = a;
  for (double& v : neg.data) v = 1.0 - v;
  CHECK(ssim_metric(a, neg) < 0.5);
}

TEST_CASE("iou and f1") {
  const Mask half = columns(100, 100, 0, 50), three = columns(100, 100, 0, 75);
  CHECK(iou(half, half) == 1.0);
  CHECK(f1(half, half) == 1.0);
  CHECK(iou(half, three) == doctest::Approx(50.0 / 75.0).epsilon(1e-15));
  CHECK(f1(half, three) == doctest::Approx(0.8).epsilon(1e-15));
  const Mask right = columns(100, 100, 50, 100);
  CHECK(iou(half, right) == 0.0);
  CHECK(f1(half, right) == 0.0);
  CHECK(iou(Mask(5, 5), Mask(5, 5)) == 1.0);
  CHECK(f1(Mask(5, 5), Mask(5, 5)) == 1.0);
  CHECK(iou(Mask(5, 5), columns(5, 5, 0, 1)) == 0.0);
  CHECK_THROWS_AS(iou(half, Mask(100, 99)), DimensionError);
  CHECK_THROWS_AS(f1(half, Mask(99, 100)), DimensionError);

  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const Mask a = random_mask(17, 13, p(rng), rng), b = random_mask(17, 13, p(rng), rng);
    const double i = iou(a, b), f = f1(a, b);
    REQUIRE(std::abs(f - 2.0 * i / (1.0 + i)) < 1e-12);
    REQUIRE(i <= f);
    REQUIRE(i == iou(b, a));
    REQUIRE(f == f1(b, a));
  }
}

TEST_CASE("grip aperture") {
  const SkeletonDef hand = load_skeleton(default_skeleton_path());
  const auto thumb = static_cast<std::size_t>(hand.tips()[0]), index = static_cast<std::size_t>(hand.tips()[1]);
  KeypointSet3D j = KeypointSet3D::all_valid(joint_positions(hand, forward_kinematics(hand, Pose::rest(hand))));

  j.points[index] = j.points[thumb];
  CHECK(grip_aperture(j, hand) == 0.0);
  j.points[thumb] = Vec3::Zero();
  j.points[index] = Vec3(0.05, 0, 0);
  CHECK(grip_aperture(j, hand) == doctest::Approx(0.05).epsilon(1e-15));

  // Opening ramp.
  for (int k = 0; k <= 10; ++k) {
    j.points[index] = Vec3(0.0, 0.01 + 0.004 * k, 0.0);
    CHECK(grip_aperture(j, hand) == doctest::Approx(0.01 + 0.004 * k).epsilon(1e-12));
  }

  Vec3 mean = Vec3::Zero();
  for (std::size_t t = 1; t < hand.tips().size(); ++t) {
    j.points[static_cast<std::size_t>(hand.tips()[t])] = Vec3(0.01 * t, 0.02, 0.0);
    mean += j.points[static_cast<std::size_t>(hand.tips()[t])];
  }
  mean /= static_cast<double>(hand.tips().size() - 1);
  CHECK(grip_aperture_mean_tips(j, hand) == doctest::Approx(mean.norm()).epsilon(1e-12));
  // Invalid non-index fingertips drop out of the mean.
  const auto last = static_cast<std::size_t>(hand.tips().back());
  j.valid[last] = 0;
  Vec3 mean4 = Vec3::Zero();
  for (std::size_t t = 1; t + 1 < hand.tips().size(); ++t) mean4 += j.points[static_cast<std::size_t>(hand.tips()[t])];
  mean4 /= static_cast<double>(hand.tips().size() - 2);
  CHECK(grip_aperture_mean_tips(j, hand) == doctest::Approx(mean4.norm()).epsilon(1e-12));

  j.valid[index] = 0;
  CHECK_THROWS_AS(grip_aperture(j, hand), InvalidArgument);
  CHECK_THROWS_AS(grip_aperture_mean_tips(j, hand), InvalidArgument);
}

TEST_CASE("evaluation report") {
  const std::vector<std::string> names{"a", "b", "c"};
  const std::vector<Mask> pred{columns(10, 10, 0, 5), columns(10, 10, 0, 5), Mask(10, 10)};
  const std::vector<Mask> truth{columns(10, 10, 0, 5), columns(10, 10, 5, 10), Mask(10, 10)};
  const EvaluationReport r = evaluate_masks(names, pred, truth);
  REQUIRE(r.views.size() == 3);
  CHECK(r.views[0].iou == 1.0);
  CHECK(r.views[1].iou == 0.0);
  CHECK(r.views[2].both_empty);
  CHECK_FALSE(r.views[0].both_empty);
  CHECK(r.mean_iou == doctest::Approx(2.0 / 3.0));
  CHECK(r.mean_f1 == doctest::Approx(2.0 / 3.0));

  const auto j = nlohmann::json::parse(evaluation_to_json(r));
  CHECK(j["count"] == 3);
  CHECK(j["views"][1]["name"] == "b");
  CHECK(j["views"][2]["both_empty"] == true);
  CHECK(j["mean_iou"].get<double>() == r.mean_iou);

  CHECK(evaluate_masks({}, {}, {}).views.empty());
  CHECK_THROWS_AS(evaluate_masks(names, pred, std::vector<Mask>(2)), DimensionError);

  const std::vector<double> t{0.0, 0.5}, a{0.05, 0.04}, m{0.06, 0.055};
  CHECK(aperture_csv(t, a, m) == "time,aperture,aperture_mean_tips\n0.000000,0.05,0.06\n0.500000,0.04,0.055\n");
  CHECK_THROWS_AS(aperture_csv(t, a, std::vector<double>{1.0}), DimensionError);
}
