#pragma once

#include "gsgrasp/adam.hpp"
#include "gsgrasp/camera.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"
#include "gsgrasp/kinematics.hpp"
#include "gsgrasp/losses.hpp"
#include "gsgrasp/rasterizer.hpp"
#include "gsgrasp/skinning.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsg {

struct LearningRates {
  double positions = 1.6e-4;
  double rotations = 1e-3;
  double log_scales = 5e-3;
  double opacity = 5e-2;
  double sh = 2.5e-3;
};

struct TrainConfig {
  int iterations = 5000;
  LearningRates lr;
  int accumulation = 4;          // backward passes per optimizer step
  int prune_interval = 500;      // 0 disables
  double prune_threshold = 0.005;
  int mask_cull_interval = 500;  // object training only; 0 disables
  std::size_t cull_min_views = 1;
  double iso_target = 0.4;
  LossWeights weights;
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Zero();
  RasterSettings raster;

  void validate() const;
};

// One training image. `pose` is used by hand training, `mask` by object
// training (an empty mask means "no mask").
struct TrainView {
  Image image;
  Camera camera;
  Pose pose;
  Mask mask;
};

struct TrainReport {
  std::vector<double> loss_curve;  // one value per backward pass
  std::vector<double> view_psnr;   // final, per training view
  double final_psnr = 0.0;         // mean of view_psnr
  std::size_t optimizer_steps = 0;
  std::size_t pruned = 0;
  std::size_t culled = 0;
};

// Per-group Adam state over a cloud, kept aligned with it across pruning.
class CloudOptimizer {
 public:
  explicit CloudOptimizer(const GaussianCloud& cloud);
  void step(GaussianCloud& cloud, const RenderGradients& grads, const LearningRates& lr);
  // Keeps the state of the listed Gaussians (same order as GaussianCloud::subset).
  void keep(std::span<const std::size_t> survivors, int sh_count);
  std::int64_t steps() const { return pos_.step; }

 private:
  AdamState pos_, rot_, scale_, opacity_, sh_;
};

GaussianCloud train_hand(GaussianCloud cloud, const SkinningGrid& grid, const SkeletonDef& skel,
                         std::span<const TrainView> views, const TrainConfig& cfg, TrainReport* report = nullptr,
                         const PerceptualLoss* perceptual = nullptr);

GaussianCloud train_object(GaussianCloud cloud, std::span<const TrainView> views, const TrainConfig& cfg,
                           TrainReport* report = nullptr, const PerceptualLoss* perceptual = nullptr);

// Renders every view with the final model and returns PSNR per view.
std::vector<double> hand_view_psnr(const GaussianCloud& cloud, const SkinningGrid& grid, const SkeletonDef& skel,
                                   std::span<const TrainView> views, const TrainConfig& cfg);
std::vector<double> object_view_psnr(const GaussianCloud& cloud, std::span<const TrainView> views,
                                     const TrainConfig& cfg);

}  // namespace gsg
