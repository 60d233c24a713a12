// Serial reference vs OpenMP kernels on fixed synthetic inputs.
#include "gsgrasp/contact.hpp"
#include "gsgrasp/parallel.hpp"
#include "gsgrasp/rasterizer.hpp"
#include "gsgrasp/skinning.hpp"
#include "gsgrasp/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace gsg;

GaussianCloud random_cloud(std::size_t n, double half, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half), s(-6.0, -4.5), c(-1.0, 1.0);
  GaussianCloud cloud;
  cloud.sh_degree = 1;
  std::vector<double> sh(12);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : sh) v = 0.3 * c(rng);
    cloud.push_back(Vec3(u(rng), u(rng), u(rng)), Quat(c(rng), c(rng), c(rng), c(rng)).normalized(),
                    Vec3(s(rng), s(rng), s(rng)), c(rng), sh);
  }
  return cloud;
}

const Camera& bench_camera() {
  static const Camera cam = sphere_cameras(1, Vec3::Zero(), 0.3, 256, 256).front();
  return cam;
}

void BM_RenderReference(benchmark::State& st) {
  const GaussianCloud cloud = random_cloud(static_cast<std::size_t>(st.range(0)), 0.05, 1);
  for (auto _ : st) benchmark::DoNotOptimize(render_reference(cloud, {}, bench_camera(), Vec3::Zero()));
}

void BM_RenderTiled(benchmark::State& st) {
  const GaussianCloud cloud = random_cloud(static_cast<std::size_t>(st.range(0)), 0.05, 1);
  for (auto _ : st) benchmark::DoNotOptimize(render(cloud, {}, bench_camera(), Vec3::Zero()));
}

void BM_BackwardReference(benchmark::State& st) {
  const GaussianCloud cloud = random_cloud(static_cast<std::size_t>(st.range(0)), 0.05, 1);
  const RenderResult r = render(cloud, {}, bench_camera(), Vec3::Zero());
  Image up(256, 256, 3, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(render_backward_reference(r.cache, cloud, {}, up));
}

void BM_BackwardTiled(benchmark::State& st) {
  const GaussianCloud cloud = random_cloud(static_cast<std::size_t>(st.range(0)), 0.05, 1);
  const RenderResult r = render(cloud, {}, bench_camera(), Vec3::Zero());
  Image up(256, 256, 3, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(render_backward(r.cache, cloud, {}, up));
}

struct Posing {
  SkeletonDef skel = two_bone_finger_skeleton();
  SkinningGrid grid = build_grid(make_segment_template(skel, 16), {48, 48, 48}, skeleton_bounds(skel, 0.02));
  GaussianCloud hand = init_from_skeleton(skel, 5000, 3);
  BoneTransforms bones = forward_kinematics(skel, random_pose_in_limits(skel, 4));
};

void BM_PoseCloud(benchmark::State& st) {
  static const Posing p;
  const auto exec = st.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : st) benchmark::DoNotOptimize(pose_cloud(p.hand, p.grid, p.bones, exec));
}

void BM_ContactBrute(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const GaussianCloud a = random_cloud(n, 0.05, 5), b = random_cloud(n, 0.05, 6);
  for (auto _ : st) benchmark::DoNotOptimize(instantaneous_contact_brute(a, b, kDefaultTau));
}

void BM_ContactGrid(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const GaussianCloud a = random_cloud(n, 0.05, 5), b = random_cloud(n, 0.05, 6);
  for (auto _ : st) benchmark::DoNotOptimize(instantaneous_contact(a, b, kDefaultTau));
}

}  // namespace

BENCHMARK(BM_RenderReference)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderTiled)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardReference)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardTiled)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PoseCloud)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ContactBrute)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ContactGrid)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
