#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testutil {

using namespace gsg;

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("gsgrasp_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Gaussians in a cube of half-size `half` around `center`, log-scales in
// [lo, hi], random rotation, opacity logits in [-2, 3], SH in [-0.5, 0.5].
inline GaussianCloud random_cloud(std::size_t n, int degree, std::mt19937_64& rng, const Vec3& center = Vec3::Zero(),
                                  double half = 0.05, double lo = -5.5, double hi = -4.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), s(lo, hi), o(-2.0, 3.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  GaussianCloud c;
  c.sh_degree = degree;
  std::vector<double> sh(static_cast<std::size_t>(c.sh_count()) * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : sh) v = 0.5 * u(rng);
    c.push_back(center + half * Vec3(u(rng), u(rng), u(rng)),
                Quat(nrm(rng), nrm(rng), nrm(rng), nrm(rng)).normalized(), Vec3(s(rng), s(rng), s(rng)), o(rng), sh);
  }
  return c;
}

inline Image random_image(int w, int h, int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h, channels);
  for (double& v : img.data) v = u(rng);
  return img;
}

// Camera at distance `dist` on +z looking at the origin.
inline Camera front_camera(int w, int h, double focal, double dist = 0.3) {
  return Camera::look_at(Vec3(0, 0, dist), Vec3::Zero(), Vec3::UnitY(), focal, w, h, 0.01, 10.0);
}

}  // namespace testutil
