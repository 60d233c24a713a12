#include "gsgrasp/training.hpp"

#include "gsgrasp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace gsg {

void TrainConfig::validate() const {
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (accumulation < 1) throw InvalidArgument("accumulation must be >= 1");
  if (prune_interval < 0 || mask_cull_interval < 0) throw InvalidArgument("intervals must be >= 0");
  if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) throw InvalidArgument("prune threshold must be in [0, 1)");
  if (!(iso_target > 0.0 && iso_target <= 1.0)) throw InvalidArgument("isotropy target must be in (0, 1]");
  for (double v : {lr.positions, lr.rotations, lr.log_scales, lr.opacity, lr.sh})
    if (!(v >= 0.0)) throw InvalidArgument("learning rates must be >= 0");
  weights.validate();
}

CloudOptimizer::CloudOptimizer(const GaussianCloud& cloud)
    : pos_(cloud.size() * 3),
      rot_(cloud.size() * 4),
      scale_(cloud.size() * 3),
      opacity_(cloud.size()),
      sh_(cloud.sh.size()) {}

void CloudOptimizer::step(GaussianCloud& cloud, const RenderGradients& g, const LearningRates& lr) {
  const std::size_t n = cloud.size();
  if (g.size() != n || pos_.size() != n * 3) throw DimensionError("optimizer state does not match the cloud");

  adam_step({cloud.positions.front().data(), n * 3}, {g.positions.front().data(), n * 3}, pos_, lr.positions);
  adam_step({cloud.log_scales.front().data(), n * 3}, {g.log_scales.front().data(), n * 3}, scale_, lr.log_scales);
  adam_step(cloud.opacity_logits, g.opacity_logits, opacity_, lr.opacity);
  adam_step(cloud.sh, g.sh, sh_, lr.sh);

  std::vector<double> q(n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    const Quat& r = cloud.rotations[i];
    q[i * 4 + 0] = r.w();
    q[i * 4 + 1] = r.x();
    q[i * 4 + 2] = r.y();
    q[i * 4 + 3] = r.z();
  }
  adam_step(q, {g.rotations.front().data(), n * 4}, rot_, lr.rotations);
  for (std::size_t i = 0; i < n; ++i)
    cloud.rotations[i] = Quat(q[i * 4], q[i * 4 + 1], q[i * 4 + 2], q[i * 4 + 3]).normalized();
}

void CloudOptimizer::keep(std::span<const std::size_t> survivors, int sh_count) {
  pos_.keep_rows(survivors, 3);
  rot_.keep_rows(survivors, 4);
  scale_.keep_rows(survivors, 3);
  opacity_.keep_rows(survivors, 1);
  sh_.keep_rows(survivors, static_cast<std::size_t>(sh_count) * 3);
}

namespace {

void add_into(RenderGradients& acc, const RenderGradients& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc.positions[i] += g.positions[i];
    acc.rotations[i] += g.rotations[i];
    acc.log_scales[i] += g.log_scales[i];
    acc.opacity_logits[i] += g.opacity_logits[i];
  }
  for (std::size_t k = 0; k < acc.sh.size(); ++k) acc.sh[k] += g.sh[k];
}

void scale_by(RenderGradients& g, double s) {
  for (auto& v : g.positions) v *= s;
  for (auto& v : g.rotations) v *= s;
  for (auto& v : g.log_scales) v *= s;
  for (auto& v : g.opacity_logits) v *= s;
  for (auto& v : g.sh) v *= s;
}

RenderGradients subset_grads(const RenderGradients& g, std::span<const std::size_t> keep, int sh_count) {
  RenderGradients out;
  out.resize(keep.size(), sh_count);
  const std::size_t row = static_cast<std::size_t>(sh_count) * 3;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const std::size_t i = keep[j];
    out.positions[j] = g.positions[i];
    out.rotations[j] = g.rotations[i];
    out.log_scales[j] = g.log_scales[i];
    out.opacity_logits[j] = g.opacity_logits[i];
    std::copy_n(g.sh.begin() + static_cast<long>(i * row), row, out.sh.begin() + static_cast<long>(j * row));
  }
  return out;
}

// One forward/backward pass: returns the loss and adds gradients into `acc`.
using PassFn = std::function<double(const GaussianCloud&, std::size_t view, RenderGradients& acc)>;

GaussianCloud run_loop(GaussianCloud cloud, std::span<const TrainView> views, const TrainConfig& cfg,
                       TrainReport* report, const PassFn& pass, const ObjectMaskSet* masks) {
  cfg.validate();
  if (views.empty()) throw InvalidArgument("training dataset is empty");
  if (cloud.empty()) throw ComputationError("cannot train an empty cloud");
  cloud.validate();

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.loss_curve.reserve(static_cast<std::size_t>(cfg.iterations));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, views.size() - 1);
  CloudOptimizer opt(cloud);
  RenderGradients acc;
  acc.resize(cloud.size(), cloud.sh_count());
  int pending = 0;

  auto shrink = [&](const std::vector<std::size_t>& keep, std::size_t& counter, const char* why, int it) {
    if (keep.size() == cloud.size()) return;
    counter += cloud.size() - keep.size();
    if (keep.empty())
      throw ComputationError(std::string("cloud became empty after ") + why + " at iteration " + std::to_string(it));
    opt.keep(keep, cloud.sh_count());
    acc = subset_grads(acc, keep, cloud.sh_count());
    cloud = cloud.subset(keep);
  };
  // Culling is active only when its interval fits in the run. Then seeds that
  // no mask sees are dropped up front, and a last pass runs at the end.
  const bool culling = masks && cfg.mask_cull_interval > 0 && cfg.mask_cull_interval <= cfg.iterations;
  if (culling)
    shrink(mask_survivors(cloud, *masks, cfg.cull_min_views), rep.culled, "mask culling", 0);

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t v = pick(rng);
    const double loss = pass(cloud, v, acc);
    if (!std::isfinite(loss)) throw ComputationError("loss became non-finite at iteration " + std::to_string(it));
    rep.loss_curve.push_back(loss);
    if (++pending == cfg.accumulation) {
      scale_by(acc, 1.0 / pending);
      if (!acc.all_finite()) throw ComputationError("non-finite gradient at iteration " + std::to_string(it));
      opt.step(cloud, acc, cfg.lr);
      ++rep.optimizer_steps;
      acc.set_zero();
      pending = 0;
    }

    if (cfg.prune_interval > 0 && (it + 1) % cfg.prune_interval == 0)
      shrink(opacity_survivors(cloud, cfg.prune_threshold), rep.pruned, "opacity pruning", it);
    if (culling && (it + 1) % cfg.mask_cull_interval == 0)
      shrink(mask_survivors(cloud, *masks, cfg.cull_min_views), rep.culled, "mask culling", it);
  }
  if (culling)
    shrink(mask_survivors(cloud, *masks, cfg.cull_min_views), rep.culled, "mask culling", cfg.iterations);
  return cloud;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<BoneTransforms> view_bones(const SkeletonDef& skel, std::span<const TrainView> views) {
  std::vector<BoneTransforms> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(forward_kinematics(skel, v.pose));
  return out;
}

}  // namespace

GaussianCloud train_hand(GaussianCloud cloud, const SkinningGrid& grid, const SkeletonDef& skel,
                         std::span<const TrainView> views, const TrainConfig& cfg, TrainReport* report,
                         const PerceptualLoss* perceptual) {
  if (views.empty()) throw InvalidArgument("training dataset is empty");
  if (static_cast<std::size_t>(grid.bones()) != skel.bone_count())
    throw DimensionError("skinning grid bone count does not match the skeleton");
  const auto bones = view_bones(skel, views);
  const PassFn pass = [&](const GaussianCloud& c, std::size_t v, RenderGradients& acc) {
    const PosedCloud posed = pose_cloud(c, grid, bones[v], cfg.raster.exec);
    const RenderResult r = render(posed.cloud, posed.blends, views[v].camera, cfg.background, cfg.raster);
    const TotalLoss loss = total_loss(r.color, views[v].image, c, cfg.weights, cfg.iso_target, perceptual);
    RenderGradients g = render_backward(r.cache, posed.cloud, posed.blends, loss.grad_image);
    for (std::size_t i = 0; i < c.size(); ++i) g.log_scales[i] += loss.grad_log_scales[i];
    add_into(acc, g);
    return loss.value;
  };
  GaussianCloud out = run_loop(std::move(cloud), views, cfg, report, pass, nullptr);
  if (report) {
    report->view_psnr = hand_view_psnr(out, grid, skel, views, cfg);
    report->final_psnr = mean_of(report->view_psnr);
  }
  return out;
}

GaussianCloud train_object(GaussianCloud cloud, std::span<const TrainView> views, const TrainConfig& cfg,
                           TrainReport* report, const PerceptualLoss* perceptual) {
  if (views.empty()) throw InvalidArgument("training dataset is empty");
  ObjectMaskSet masks;
  for (const auto& v : views) {
    if (v.mask.width == 0) continue;
    if (v.mask.width != v.camera.width || v.mask.height != v.camera.height)
      throw DimensionError("mask size does not match its camera");
    masks.masks.push_back(v.mask);
    masks.cameras.push_back(v.camera);
  }
  const PassFn pass = [&](const GaussianCloud& c, std::size_t v, RenderGradients& acc) {
    const RenderResult r = render(c, {}, views[v].camera, cfg.background, cfg.raster);
    const TotalLoss loss = total_loss(r.color, views[v].image, c, cfg.weights, cfg.iso_target, perceptual);
    RenderGradients g = render_backward(r.cache, c, {}, loss.grad_image);
    for (std::size_t i = 0; i < c.size(); ++i) g.log_scales[i] += loss.grad_log_scales[i];
    add_into(acc, g);
    return loss.value;
  };
  GaussianCloud out = run_loop(std::move(cloud), views, cfg, report, pass, masks.masks.empty() ? nullptr : &masks);
  if (report) {
    report->view_psnr = object_view_psnr(out, views, cfg);
    report->final_psnr = mean_of(report->view_psnr);
  }
  return out;
}

std::vector<double> hand_view_psnr(const GaussianCloud& cloud, const SkinningGrid& grid, const SkeletonDef& skel,
                                   std::span<const TrainView> views, const TrainConfig& cfg) {
  std::vector<double> out;
  for (const auto& v : views) {
    const PosedCloud posed = pose_cloud(cloud, grid, forward_kinematics(skel, v.pose), cfg.raster.exec);
    out.push_back(psnr(render(posed.cloud, posed.blends, v.camera, cfg.background, cfg.raster).color, v.image));
  }
  return out;
}

std::vector<double> object_view_psnr(const GaussianCloud& cloud, std::span<const TrainView> views,
                                     const TrainConfig& cfg) {
  std::vector<double> out;
  for (const auto& v : views) out.push_back(psnr(render(cloud, {}, v.camera, cfg.background, cfg.raster).color, v.image));
  return out;
}

}  // namespace gsg
