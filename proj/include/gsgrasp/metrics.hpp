#pragma once

#include "gsgrasp/image.hpp"
#include "gsgrasp/kinematics.hpp"
#include "gsgrasp/pose_fit.hpp"

#include <span>
#include <string>
#include <vector>

namespace gsg {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE); kPsnrCap for identical images.
double psnr(const Image& a, const Image& b);
// Mean SSIM (same window and constants as the training loss).
double ssim_metric(const Image& a, const Image& b);

// |A n B| / |A u B|; 1 when both are empty.
double iou(const Mask& pred, const Mask& truth);
// 2 |A n B| / (|A| + |B|); 1 when both are empty.
double f1(const Mask& pred, const Mask& truth);

// Thumb tip (tips[0]) to index tip (tips[1]).
double grip_aperture(const KeypointSet3D& joints, const SkeletonDef& skel);
// Thumb tip to the mean of the other valid fingertips.
double grip_aperture_mean_tips(const KeypointSet3D& joints, const SkeletonDef& skel);

struct MaskScore {
  std::string name;
  double iou = 0.0;
  double f1 = 0.0;
  bool both_empty = false;
};

struct EvaluationReport {
  std::vector<MaskScore> views;
  double mean_iou = 0.0;
  double mean_f1 = 0.0;
};

EvaluationReport evaluate_masks(std::span<const std::string> names, std::span<const Mask> pred,
                                std::span<const Mask> truth);
std::string evaluation_to_json(const EvaluationReport& report);

// "time,aperture,aperture_mean_tips" rows.
std::string aperture_csv(std::span<const double> times, std::span<const double> aperture,
                         std::span<const double> aperture_mean_tips);

}  // namespace gsg
