#include "gsgrasp/metrics.hpp"

#include "gsgrasp/losses.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace gsg {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("psnr: image shapes differ");
  if (a.data.empty()) throw DimensionError("psnr: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim_metric(const Image& a, const Image& b) { return 1.0 - loss_ssim(a, b).value; }

namespace {

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts count_masks(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height)
    throw DimensionError("mask shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                         std::to_string(b.width) + "x" + std::to_string(b.height));
  Counts c;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    c.a += x;
    c.b += y;
    c.both += x && y;
  }
  return c;
}

}  // namespace

double iou(const Mask& pred, const Mask& truth) {
  const Counts c = count_masks(pred, truth);
  const std::size_t uni = c.a + c.b - c.both;
  return uni == 0 ? 1.0 : static_cast<double>(c.both) / static_cast<double>(uni);
}

double f1(const Mask& pred, const Mask& truth) {
  const Counts c = count_masks(pred, truth);
  return c.a + c.b == 0 ? 1.0 : 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

namespace {

const Vec3& tip(const KeypointSet3D& joints, const SkeletonDef& skel, std::size_t which) {
  if (skel.tips().size() <= which) throw InvalidArgument("skeleton does not list enough fingertips");
  const auto j = static_cast<std::size_t>(skel.tips()[which]);
  if (j >= joints.size() || !joints.valid[j])
    throw InvalidArgument(std::string(which == 0 ? "thumb" : "finger") + " tip joint " + std::to_string(j) +
                          " is invalid");
  return joints.points[j];
}

}  // namespace

double grip_aperture(const KeypointSet3D& joints, const SkeletonDef& skel) {
  return (tip(joints, skel, 0) - tip(joints, skel, 1)).norm();
}

double grip_aperture_mean_tips(const KeypointSet3D& joints, const SkeletonDef& skel) {
  const Vec3& thumb = tip(joints, skel, 0);
  tip(joints, skel, 1);
  Vec3 sum = Vec3::Zero();
  int n = 0;
  for (std::size_t t = 1; t < skel.tips().size(); ++t) {
    const auto j = static_cast<std::size_t>(skel.tips()[t]);
    if (j < joints.size() && joints.valid[j]) {
      sum += joints.points[j];
      ++n;
    }
  }
  return (thumb - sum / n).norm();
}

EvaluationReport evaluate_masks(std::span<const std::string> names, std::span<const Mask> pred,
                                std::span<const Mask> truth) {
  if (names.size() != pred.size() || pred.size() != truth.size())
    throw DimensionError("evaluation needs one name, prediction and truth per view");
  EvaluationReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    MaskScore s;
    s.name = names[i];
    s.iou = iou(pred[i], truth[i]);
    s.f1 = f1(pred[i], truth[i]);
    s.both_empty = pred[i].count() == 0 && truth[i].count() == 0;
    r.mean_iou += s.iou;
    r.mean_f1 += s.f1;
    r.views.push_back(std::move(s));
  }
  if (!r.views.empty()) {
    r.mean_iou /= static_cast<double>(r.views.size());
    r.mean_f1 /= static_cast<double>(r.views.size());
  }
  return r;
}

std::string evaluation_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["views"] = nlohmann::json::array();
  for (const auto& s : report.views)
    j["views"].push_back({{"name", s.name}, {"iou", s.iou}, {"f1", s.f1}, {"both_empty", s.both_empty}});
  j["mean_iou"] = report.mean_iou;
  j["mean_f1"] = report.mean_f1;
  j["count"] = report.views.size();
  return j.dump(2);
}

std::string aperture_csv(std::span<const double> times, std::span<const double> aperture,
                         std::span<const double> aperture_mean_tips) {
  if (times.size() != aperture.size() || times.size() != aperture_mean_tips.size())
    throw DimensionError("aperture series lengths differ");
  std::string out = "time,aperture,aperture_mean_tips\n";
  char buf[96];
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g\n", times[i], aperture[i], aperture_mean_tips[i]);
    out += buf;
  }
  return out;
}

}  // namespace gsg
