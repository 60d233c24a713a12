#pragma once

#include "gsgrasp/common.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"

#include <functional>
#include <vector>

namespace gsg {

// Coefficients of the L1, SSIM, perceptual and isotropy terms.
struct LossWeights {
  double l1 = 0.7;
  double ssim = 0.1;
  double perceptual = 0.1;
  double iso = 0.1;

  void validate() const;
  LossWeights operator+(const LossWeights& o) const {
    return {l1 + o.l1, ssim + o.ssim, perceptual + o.perceptual, iso + o.iso};
  }
};

struct ImageLoss {
  double value = 0.0;
  Image grad;  // d(value)/d(render)
};

struct IsoLoss {
  double value = 0.0;
  std::vector<Vec3> grad_log_scales;
};

// Optional learned image term: (render, target) -> value + gradient.
using PerceptualLoss = std::function<ImageLoss(const Image&, const Image&)>;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Mean absolute error; gradient sign(r - t) / count with sign(0) = 0.
ImageLoss loss_l1(const Image& render, const Image& target);

// Per-pixel, per-channel SSIM with an 11x11 Gaussian window and zero padding.
Image ssim_map(const Image& a, const Image& b);
// 1 - mean SSIM, with the analytic gradient.
ImageLoss loss_ssim(const Image& render, const Image& target);

// Mean over Gaussians of (min scale / max scale - target)^2.
IsoLoss loss_iso(const GaussianCloud& cloud, double target);

struct TotalLoss {
  double value = 0.0;
  double l1 = 0.0, ssim = 0.0, perceptual = 0.0, iso = 0.0;  // unweighted terms
  Image grad_image;
  std::vector<Vec3> grad_log_scales;
};

// Weighted sum. Terms with zero weight are skipped; the perceptual term is 0
// without a plug-in.
TotalLoss total_loss(const Image& render, const Image& target, const GaussianCloud& cloud, const LossWeights& weights,
                     double iso_target, const PerceptualLoss* perceptual = nullptr);

}  // namespace gsg
