#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/common.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"
#include "gsgrasp/skinning.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gsg {

struct RasterSettings {
  int tile_size = 16;              // <= 0 means one tile covering the image
  double dilation = 0.3;           // px^2 added to the 2D covariance diagonal
  double extent_chi2 = 9.210340371976184;  // 99% ellipse of a 2D Gaussian
  double min_transmittance = 1e-4;
  Execution exec = Execution::Parallel;
};

struct Projection {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  double depth = 0.0;
};

// EWA projection of one Gaussian; nullopt when culled.
std::optional<Projection> project_gaussian(const Camera& cam, const Vec3& mean, const Mat3& cov,
                                           const RasterSettings& settings = {});

// Per-Gaussian screen-space state from the forward pass.
struct Splat {
  bool visible = false;
  Vec2 mean = Vec2::Zero();
  Mat2 conic = Mat2::Identity();  // inverse 2D covariance
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  std::array<bool, 3> color_clamped{false, false, false};
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel range of the 99% ellipse
};

struct RenderCache {
  int width = 0, height = 0;
  int tile_size = 0;
  int tiles_x = 0, tiles_y = 0;
  Camera camera;
  Vec3 background = Vec3::Zero();
  RasterSettings settings;
  std::vector<Splat> splats;
  std::vector<std::uint32_t> tile_offsets;   // CSR over tiles
  std::vector<std::uint32_t> tile_entries;   // Gaussian indices, depth order
  std::vector<double> final_transmittance;   // per pixel
  std::vector<std::array<bool, 3>> clamped;  // per pixel output clamp
  bool valid() const { return width > 0 && final_transmittance.size() == static_cast<std::size_t>(width) * height; }
};

struct RenderResult {
  Image color;  // 3 channels, clamped to [0,1]
  Image alpha;  // 1 channel, 1 - final transmittance
  RenderCache cache;
};

struct RenderGradients {
  std::vector<Vec3> positions;
  std::vector<Vec4> rotations;  // (w, x, y, z)
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> sh;

  void resize(std::size_t n, int sh_count);
  void set_zero();
  std::size_t size() const { return positions.size(); }
  bool all_finite() const;
};

// Tiled front-to-back compositing. `blends` (empty = identity) supplies the
// per-Gaussian rotation used to canonicalize view directions for SH lookup.
RenderResult render(const GaussianCloud& posed, std::span<const Blend> blends, const Camera& cam,
                    const Vec3& background, const RasterSettings& settings = {});

// Reverse-mode gradients of sum(upstream * color) with respect to the state
// of the cloud that was posed with `blends` (the canonical cloud; blends are
// constants). With empty blends, gradients are for `posed` itself.
RenderGradients render_backward(const RenderCache& cache, const GaussianCloud& posed, std::span<const Blend> blends,
                                const Image& upstream);

// Serial reference: no tiles, one pass over all depth-sorted Gaussians per
// pixel, gradients accumulated directly in pixel order.
RenderResult render_reference(const GaussianCloud& posed, std::span<const Blend> blends, const Camera& cam,
                              const Vec3& background, const RasterSettings& settings = {});
RenderGradients render_backward_reference(const RenderCache& cache, const GaussianCloud& posed,
                                          std::span<const Blend> blends, const Image& upstream);

}  // namespace gsg
