#include "gsgrasp/losses.hpp"

#include <array>
#include <cmath>

namespace gsg {

namespace {

void check_pair(const Image& a, const Image& b) {
  if (!a.same_shape(b))
    throw DimensionError("image shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                         std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height) + "x" + std::to_string(b.channels));
  if (a.data.empty()) throw DimensionError("empty image");
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable "same" convolution with zero padding on one plane. The kernel is
// symmetric, so this is also its own adjoint.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  static const auto taps = gaussian_taps();
  constexpr int r = kSsimWindow / 2;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) s += taps[static_cast<std::size_t>(k + r)] * in[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) s += taps[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

std::vector<double> plane(const Image& img, int c) {
  std::vector<double> p(img.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
  return p;
}

struct SsimPlane {
  std::vector<double> s;
  std::vector<double> mx, my, a1, a2, b1, b2;
};

SsimPlane ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int w, int h) {
  const std::size_t n = x.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  SsimPlane p;
  p.mx = blur(x, w, h);
  p.my = blur(y, w, h);
  const auto exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
  p.s.resize(n);
  p.a1.resize(n);
  p.a2.resize(n);
  p.b1.resize(n);
  p.b2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mx = p.mx[i], my = p.my[i];
    p.a1[i] = 2.0 * mx * my + kSsimC1;
    p.a2[i] = 2.0 * (exy[i] - mx * my) + kSsimC2;
    p.b1[i] = mx * mx + my * my + kSsimC1;
    p.b2[i] = (exx[i] - mx * mx) + (eyy[i] - my * my) + kSsimC2;
    p.s[i] = p.a1[i] * p.a2[i] / (p.b1[i] * p.b2[i]);
  }
  return p;
}

void check_ssim_size(const Image& a) {
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw DimensionError("SSIM needs at least 11x11 pixels, got " + std::to_string(a.width) + "x" +
                         std::to_string(a.height));
}

}  // namespace

void LossWeights::validate() const {
  if (!(l1 >= 0.0 && ssim >= 0.0 && perceptual >= 0.0 && iso >= 0.0))
    throw InvalidArgument("loss weights must be non-negative");
}

ImageLoss loss_l1(const Image& render, const Image& target) {
  check_pair(render, target);
  ImageLoss out;
  out.grad = Image(render.width, render.height, render.channels);
  const double inv = 1.0 / static_cast<double>(render.data.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < render.data.size(); ++i) {
    const double d = render.data[i] - target.data[i];
    sum += std::abs(d);
    out.grad.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  out.value = sum * inv;
  return out;
}

Image ssim_map(const Image& a, const Image& b) {
  check_pair(a, b);
  check_ssim_size(a);
  Image out(a.width, a.height, a.channels);
  for (int c = 0; c < a.channels; ++c) {
    const auto p = ssim_plane(plane(a, c), plane(b, c), a.width, a.height);
    for (std::size_t i = 0; i < p.s.size(); ++i) out.data[i * a.channels + c] = p.s[i];
  }
  return out;
}

ImageLoss loss_ssim(const Image& render, const Image& target) {
  check_pair(render, target);
  check_ssim_size(render);
  const int w = render.width, h = render.height;
  const double g = -1.0 / static_cast<double>(render.data.size());  // dL/dS per sample
  ImageLoss out;
  out.grad = Image(w, h, render.channels);
  double total = 0.0;
  for (int c = 0; c < render.channels; ++c) {
    const auto x = plane(render, c), y = plane(target, c);
    const auto p = ssim_plane(x, y, w, h);
    const std::size_t n = x.size();
    std::vector<double> g_mx(n), g_exx(n), g_exy(n);
    for (std::size_t i = 0; i < n; ++i) {
      total += p.s[i];
      const double bb = p.b1[i] * p.b2[i];
      g_mx[i] = g * (2.0 * p.my[i] * (p.a2[i] - p.a1[i]) / bb - 2.0 * p.mx[i] * p.s[i] * (1.0 / p.b1[i] - 1.0 / p.b2[i]));
      g_exx[i] = g * (-p.s[i] / p.b2[i]);
      g_exy[i] = g * (2.0 * p.a1[i] / bb);
    }
    const auto c_mx = blur(g_mx, w, h), c_exx = blur(g_exx, w, h), c_exy = blur(g_exy, w, h);
    for (std::size_t i = 0; i < n; ++i)
      out.grad.data[i * render.channels + c] = c_mx[i] + 2.0 * x[i] * c_exx[i] + y[i] * c_exy[i];
  }
  out.value = 1.0 - total / static_cast<double>(render.data.size());
  return out;
}

IsoLoss loss_iso(const GaussianCloud& cloud, double target) {
  if (!(target > 0.0 && target <= 1.0)) throw InvalidArgument("isotropy target must be in (0, 1]");
  IsoLoss out;
  out.grad_log_scales.assign(cloud.size(), Vec3::Zero());
  if (cloud.empty()) return out;
  const double inv = 1.0 / static_cast<double>(cloud.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& ls = cloud.log_scales[i];
    int lo = 0, hi = 0;
    for (int a = 1; a < 3; ++a) {
      if (ls[a] < ls[lo]) lo = a;
      if (ls[a] > ls[hi]) hi = a;
    }
    const double r = std::exp(ls[lo]) / std::exp(ls[hi]);
    sum += (r - target) * (r - target);
    if (lo != hi) {
      const double g = 2.0 * (r - target) * inv * r;
      out.grad_log_scales[i][lo] += g;
      out.grad_log_scales[i][hi] -= g;
    }
  }
  out.value = sum * inv;
  return out;
}

TotalLoss total_loss(const Image& render, const Image& target, const GaussianCloud& cloud, const LossWeights& weights,
                     double iso_target, const PerceptualLoss* perceptual) {
  weights.validate();
  check_pair(render, target);
  TotalLoss out;
  out.grad_image = Image(render.width, render.height, render.channels);
  out.grad_log_scales.assign(cloud.size(), Vec3::Zero());
  auto add_image = [&](const ImageLoss& l, double w) {
    for (std::size_t i = 0; i < l.grad.data.size(); ++i) out.grad_image.data[i] += w * l.grad.data[i];
  };
  if (weights.l1 != 0.0) {
    const auto l = loss_l1(render, target);
    out.l1 = l.value;
    out.value += weights.l1 * l.value;
    add_image(l, weights.l1);
  }
  if (weights.ssim != 0.0) {
    const auto l = loss_ssim(render, target);
    out.ssim = l.value;
    out.value += weights.ssim * l.value;
    add_image(l, weights.ssim);
  }
  if (weights.perceptual != 0.0 && perceptual && *perceptual) {
    const auto l = (*perceptual)(render, target);
    if (!l.grad.same_shape(render)) throw DimensionError("perceptual gradient shape differs from the render");
    out.perceptual = l.value;
    out.value += weights.perceptual * l.value;
    add_image(l, weights.perceptual);
  }
  if (weights.iso != 0.0) {
    const auto l = loss_iso(cloud, iso_target);
    out.iso = l.value;
    out.value += weights.iso * l.value;
    for (std::size_t i = 0; i < cloud.size(); ++i) out.grad_log_scales[i] = weights.iso * l.grad_log_scales[i];
  }
  return out;
}

}  // namespace gsg
