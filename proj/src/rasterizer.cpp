#include "gsgrasp/rasterizer.hpp"

#include "gsgrasp/sh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsg {

namespace {

// dm/dconic, dm/dmean, d(alpha)/d(opacity) and dcolor accumulators for one
// Gaussian (or one tile-list entry).
struct Accum {
  double mean[2] = {0.0, 0.0};
  double conic[3] = {0.0, 0.0, 0.0};  // (00, 01, 11) of the full symmetric gradient
  double opacity = 0.0;
  double color[3] = {0.0, 0.0, 0.0};

  void add(const Accum& o) {
    for (int a = 0; a < 2; ++a) mean[a] += o.mean[a];
    for (int a = 0; a < 3; ++a) conic[a] += o.conic[a];
    opacity += o.opacity;
    for (int a = 0; a < 3; ++a) color[a] += o.color[a];
  }
};

Mat3 blend_rotation(std::span<const Blend> blends, std::size_t i) {
  return blends.empty() ? Mat3::Identity() : blends[i].rotation;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& pc) {
  const double z = pc.z(), z2 = z * z;
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx / z, 0.0, -cam.fx * pc.x() / z2, 0.0, cam.fy / z, -cam.fy * pc.y() / z2;
  return j;
}

Splat prepare_splat(const GaussianCloud& cloud, std::span<const Blend> blends, std::size_t i, const Camera& cam,
                    const RasterSettings& settings) {
  Splat s;
  const auto proj = project_gaussian(cam, cloud.positions[i], cloud.covariance(i), settings);
  if (!proj) return s;
  const Mat2& cov = proj->cov;
  const double ex = std::sqrt(settings.extent_chi2 * cov(0, 0));
  const double ey = std::sqrt(settings.extent_chi2 * cov(1, 1));
  s.x0 = std::max(0, static_cast<int>(std::ceil(proj->mean.x() - ex)));
  s.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(proj->mean.x() + ex)));
  s.y0 = std::max(0, static_cast<int>(std::ceil(proj->mean.y() - ey)));
  s.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(proj->mean.y() + ey)));
  if (s.x0 > s.x1 || s.y0 > s.y1) return s;
  s.visible = true;
  s.mean = proj->mean;
  s.conic = cov.inverse();
  s.depth = proj->depth;
  s.opacity = cloud.opacity(i);
  const Vec3 dir = canonical_view_dir(blend_rotation(blends, i), cloud.positions[i] - cam.center());
  const Vec3 c = eval_sh(cloud.sh_degree, cloud.sh_ptr(i), dir);
  for (int ch = 0; ch < 3; ++ch) {
    s.color_clamped[static_cast<std::size_t>(ch)] = c[ch] < 0.0;
    s.color[ch] = std::max(c[ch], 0.0);
  }
  return s;
}

std::vector<std::uint32_t> depth_order(const std::vector<Splat>& splats) {
  std::vector<std::uint32_t> order;
  order.reserve(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i)
    if (splats[i].visible) order.push_back(static_cast<std::uint32_t>(i));
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
    return a < b;
  });
  return order;
}

// Alpha of splat `s` at pixel (x, y), or a negative value when the pixel is
// outside its 99% ellipse. `gauss` and `d` receive the kernel value and offset.
double splat_alpha(const Splat& s, int x, int y, double chi2, double& gauss, Vec2& d, double& m) {
  if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) return -1.0;
  d = Vec2(x - s.mean.x(), y - s.mean.y());
  m = d.dot(s.conic * d);
  if (m > chi2) return -1.0;
  gauss = std::exp(-0.5 * m);
  return s.opacity * gauss;
}

void setup_cache(RenderCache& cache, const GaussianCloud& cloud, std::span<const Blend> blends, const Camera& cam,
                 const Vec3& background, const RasterSettings& settings) {
  cam.validate();
  if (!blends.empty() && blends.size() != cloud.size()) throw DimensionError("blend count does not match cloud size");
  cache.width = cam.width;
  cache.height = cam.height;
  cache.camera = cam;
  cache.background = background;
  cache.settings = settings;
  cache.splats.resize(cloud.size());
  const auto n = static_cast<long>(cloud.size());
  if (settings.exec == Execution::Serial) {
    for (long i = 0; i < n; ++i) cache.splats[i] = prepare_splat(cloud, blends, static_cast<std::size_t>(i), cam, settings);
  } else {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) cache.splats[i] = prepare_splat(cloud, blends, static_cast<std::size_t>(i), cam, settings);
  }
}

void bin_tiles(RenderCache& cache, int tile_size) {
  cache.tile_size = tile_size;
  cache.tiles_x = (cache.width + tile_size - 1) / tile_size;
  cache.tiles_y = (cache.height + tile_size - 1) / tile_size;
  const std::size_t tiles = static_cast<std::size_t>(cache.tiles_x) * cache.tiles_y;
  const auto order = depth_order(cache.splats);
  cache.tile_offsets.assign(tiles + 1, 0);
  for (std::uint32_t g : order) {
    const Splat& s = cache.splats[g];
    for (int ty = s.y0 / tile_size; ty <= s.y1 / tile_size; ++ty)
      for (int tx = s.x0 / tile_size; tx <= s.x1 / tile_size; ++tx)
        ++cache.tile_offsets[static_cast<std::size_t>(ty) * cache.tiles_x + tx + 1];
  }
  for (std::size_t t = 0; t < tiles; ++t) cache.tile_offsets[t + 1] += cache.tile_offsets[t];
  cache.tile_entries.resize(cache.tile_offsets.back());
  std::vector<std::uint32_t> fill(cache.tile_offsets.begin(), cache.tile_offsets.end() - 1);
  for (std::uint32_t g : order) {
    const Splat& s = cache.splats[g];
    for (int ty = s.y0 / tile_size; ty <= s.y1 / tile_size; ++ty)
      for (int tx = s.x0 / tile_size; tx <= s.x1 / tile_size; ++tx)
        cache.tile_entries[fill[static_cast<std::size_t>(ty) * cache.tiles_x + tx]++] = g;
  }
}

// Front-to-back compositing of one pixel over `list` (depth-ordered indices).
template <class List>
void shade_pixel(const RenderCache& cache, const List& list, int x, int y, RenderResult& out) {
  const double chi2 = cache.settings.extent_chi2;
  double t = 1.0;
  Vec3 c = Vec3::Zero();
  for (std::uint32_t g : list) {
    const Splat& s = cache.splats[g];
    double gauss, m;
    Vec2 d;
    const double a = splat_alpha(s, x, y, chi2, gauss, d, m);
    if (a < 0.0) continue;
    c += s.color * (a * t);
    t *= 1.0 - a;
    if (t < cache.settings.min_transmittance) break;
  }
  const std::size_t p = static_cast<std::size_t>(y) * cache.width + x;
  const_cast<RenderCache&>(cache).final_transmittance[p] = t;
  std::array<bool, 3> clamped{};
  for (int ch = 0; ch < 3; ++ch) {
    const double v = c[ch] + t * cache.background[ch];
    clamped[static_cast<std::size_t>(ch)] = v < 0.0 || v > 1.0;
    out.color.at(x, y, ch) = std::clamp(v, 0.0, 1.0);
  }
  const_cast<RenderCache&>(cache).clamped[p] = clamped;
  out.alpha.at(x, y, 0) = 1.0 - t;
}

struct Contributor {
  std::uint32_t slot;  // position in the list being composited
  double alpha;
  double gauss;
  double transmittance;  // before this splat
  Vec2 d;
};

// Back-to-front gradient pass for one pixel; calls sink(slot, Accum) per
// contributing splat.
template <class List, class Sink>
void backprop_pixel(const RenderCache& cache, const List& list, int x, int y, const Image& upstream,
                    std::vector<Contributor>& scratch, Sink&& sink) {
  const std::size_t p = static_cast<std::size_t>(y) * cache.width + x;
  Vec3 dl_dc;
  for (int ch = 0; ch < 3; ++ch)
    dl_dc[ch] = cache.clamped[p][static_cast<std::size_t>(ch)] ? 0.0 : upstream.at(x, y, ch);
  if (dl_dc.isZero(0.0)) return;

  const double chi2 = cache.settings.extent_chi2;
  scratch.clear();
  double t = 1.0;
  std::uint32_t slot = 0;
  for (std::uint32_t g : list) {
    const Splat& s = cache.splats[g];
    double gauss, m;
    Vec2 d;
    const double a = splat_alpha(s, x, y, chi2, gauss, d, m);
    if (a >= 0.0) {
      scratch.push_back({slot, a, gauss, t, d});
      t *= 1.0 - a;
      if (t < cache.settings.min_transmittance) break;
    }
    ++slot;
  }

  // behind = color of everything after the current splat, relative to the
  // light that passes the current splat.
  Vec3 behind = cache.background;
  for (auto it = scratch.rbegin(); it != scratch.rend(); ++it) {
    const std::uint32_t g = list[it->slot];
    const Splat& s = cache.splats[g];
    Accum acc;
    const double w = it->alpha * it->transmittance;
    for (int ch = 0; ch < 3; ++ch) acc.color[ch] = w * dl_dc[ch];
    const double dl_da = it->transmittance * (s.color - behind).dot(dl_dc);
    acc.opacity = it->gauss * dl_da;
    const double dl_dm = -0.5 * it->alpha * dl_da;
    const Vec2 qd = s.conic * it->d;
    acc.mean[0] = -2.0 * dl_dm * qd.x();
    acc.mean[1] = -2.0 * dl_dm * qd.y();
    acc.conic[0] = dl_dm * it->d.x() * it->d.x();
    acc.conic[1] = dl_dm * it->d.x() * it->d.y();
    acc.conic[2] = dl_dm * it->d.y() * it->d.y();
    sink(it->slot, acc);
    behind = s.color * it->alpha + behind * (1.0 - it->alpha);
  }
}

Vec4 quat_grad(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {2.0 * (z * (g(1, 0) - g(0, 1)) + y * (g(0, 2) - g(2, 0)) + x * (g(2, 1) - g(1, 2))),
          2.0 * (y * (g(0, 1) + g(1, 0)) + z * (g(0, 2) + g(2, 0)) + w * (g(2, 1) - g(1, 2)) -
                 2.0 * x * (g(1, 1) + g(2, 2))),
          2.0 * (x * (g(0, 1) + g(1, 0)) + w * (g(0, 2) - g(2, 0)) + z * (g(1, 2) + g(2, 1)) -
                 2.0 * y * (g(0, 0) + g(2, 2))),
          2.0 * (w * (g(1, 0) - g(0, 1)) + x * (g(0, 2) + g(2, 0)) + y * (g(1, 2) + g(2, 1)) -
                 2.0 * z * (g(0, 0) + g(1, 1)))};
}

Eigen::Matrix4d quat_left_matrix(const Quat& a) {
  Eigen::Matrix4d m;
  m << a.w(), -a.x(), -a.y(), -a.z(),  //
      a.x(), a.w(), -a.z(), a.y(),     //
      a.y(), a.z(), a.w(), -a.x(),     //
      a.z(), -a.y(), a.x(), a.w();
  return m;
}

// Chains screen-space accumulators of Gaussian i back to its state.
void chain_gaussian(const RenderCache& cache, const GaussianCloud& cloud, std::span<const Blend> blends,
                    std::size_t i, const Accum& acc, RenderGradients& out) {
  const Splat& s = cache.splats[i];
  if (!s.visible) return;
  const Camera& cam = cache.camera;
  const int nsh = cloud.sh_count();

  // Color and view direction.
  const Mat3 rg = blend_rotation(blends, i);
  const Vec3 v = cloud.positions[i] - cam.center();
  const Vec3 wv = rg.transpose() * v;
  const Vec3 dir = wv.normalized();
  std::array<double, 16> basis;
  std::array<Vec3, 16> dbasis;
  sh_basis(cloud.sh_degree, dir, basis, &dbasis);
  Vec3 gc(acc.color[0], acc.color[1], acc.color[2]);
  for (int ch = 0; ch < 3; ++ch)
    if (s.color_clamped[static_cast<std::size_t>(ch)]) gc[ch] = 0.0;
  const double* coeffs = cloud.sh_ptr(i);
  double* gsh = out.sh.data() + i * static_cast<std::size_t>(nsh) * 3;
  Vec3 g_dir = Vec3::Zero();
  for (int k = 0; k < nsh; ++k) {
    for (int ch = 0; ch < 3; ++ch) {
      gsh[k * 3 + ch] = basis[static_cast<std::size_t>(k)] * gc[ch];
      g_dir += gc[ch] * coeffs[k * 3 + ch] * dbasis[static_cast<std::size_t>(k)];
    }
  }
  const Vec3 g_w = (g_dir - dir * dir.dot(g_dir)) / wv.norm();
  Vec3 g_pos = rg * g_w;

  // Opacity.
  out.opacity_logits[i] = acc.opacity * s.opacity * (1.0 - s.opacity);

  // Conic -> 2D covariance -> 3D covariance and camera-space mean.
  const Mat3 w = cam.rotation();
  const Vec3 pc = cam.to_camera(cloud.positions[i]);
  const auto jac = projection_jacobian(cam, pc);
  const Eigen::Matrix<double, 2, 3> t2 = jac * w;
  const Quat& qraw = cloud.rotations[i];
  const Vec4 q(qraw.w(), qraw.x(), qraw.y(), qraw.z());
  const double qn = q.norm();
  const Vec4 qh = q / qn;
  const Mat3 r = Quat(qh[0], qh[1], qh[2], qh[3]).toRotationMatrix();
  const Vec3 sc = cloud.log_scales[i].array().exp();
  const Mat3 n = r * sc.asDiagonal();
  const Mat3 sigma = n * n.transpose();

  Mat2 g_conic;
  g_conic << acc.conic[0], acc.conic[1], acc.conic[1], acc.conic[2];
  const Mat2 g_cov2 = -s.conic * g_conic * s.conic;
  const Mat3 g_sigma = t2.transpose() * g_cov2 * t2;
  const Eigen::Matrix<double, 2, 3> g_t2 = 2.0 * g_cov2 * t2 * sigma;
  const Eigen::Matrix<double, 2, 3> g_j = g_t2 * w.transpose();

  const double z = pc.z(), z2 = z * z, z3 = z2 * z;
  Vec3 g_pc;
  g_pc.x() = g_j(0, 2) * (-cam.fx / z2) + acc.mean[0] * cam.fx / z;
  g_pc.y() = g_j(1, 2) * (-cam.fy / z2) + acc.mean[1] * cam.fy / z;
  g_pc.z() = g_j(0, 0) * (-cam.fx / z2) + g_j(0, 2) * (2.0 * cam.fx * pc.x() / z3) + g_j(1, 1) * (-cam.fy / z2) +
             g_j(1, 2) * (2.0 * cam.fy * pc.y() / z3) - acc.mean[0] * cam.fx * pc.x() / z2 -
             acc.mean[1] * cam.fy * pc.y() / z2;
  g_pos += w.transpose() * g_pc;

  // Sigma = N N^T with N = R diag(s).
  const Mat3 g_n = 2.0 * g_sigma * n;
  const Mat3 g_r = g_n * sc.asDiagonal();
  Vec3 g_ls;
  for (int j = 0; j < 3; ++j) g_ls[j] = g_n.col(j).dot(r.col(j)) * sc[j];
  const Vec4 g_qh = quat_grad(qh, g_r);
  Vec4 g_q = (g_qh - qh * qh.dot(g_qh)) / qn;

  if (!blends.empty()) {
    g_pos = blends[i].transform.topLeftCorner<3, 3>().transpose() * g_pos;
    g_q = quat_left_matrix(rotation_quat(blends[i].rotation)).transpose() * g_q;
  }
  out.positions[i] = g_pos;
  out.rotations[i] = g_q;
  out.log_scales[i] = g_ls;
}

void check_backward_inputs(const RenderCache& cache, const GaussianCloud& cloud, std::span<const Blend> blends,
                           const Image& upstream) {
  if (!cache.valid()) throw InvalidArgument("render_backward called without a forward cache");
  if (cache.splats.size() != cloud.size()) throw DimensionError("forward cache was built for a different cloud");
  if (!blends.empty() && blends.size() != cloud.size()) throw DimensionError("blend count does not match cloud size");
  if (upstream.width != cache.width || upstream.height != cache.height || upstream.channels != 3)
    throw DimensionError("upstream gradient image does not match the render");
}

void chain_all(const RenderCache& cache, const GaussianCloud& cloud, std::span<const Blend> blends,
               const std::vector<Accum>& acc, RenderGradients& out) {
  const auto n = static_cast<long>(cloud.size());
  if (cache.settings.exec == Execution::Serial) {
    for (long i = 0; i < n; ++i) chain_gaussian(cache, cloud, blends, static_cast<std::size_t>(i), acc[i], out);
  } else {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) chain_gaussian(cache, cloud, blends, static_cast<std::size_t>(i), acc[i], out);
  }
}

}  // namespace

std::optional<Projection> project_gaussian(const Camera& cam, const Vec3& mean, const Mat3& cov,
                                           const RasterSettings& settings) {
  const Vec3 pc = cam.to_camera(mean);
  if (!(pc.z() > cam.near && pc.z() < cam.far)) return std::nullopt;
  const auto jac = projection_jacobian(cam, pc);
  const Eigen::Matrix<double, 2, 3> t2 = jac * cam.rotation();
  Projection p;
  p.cov = t2 * cov * t2.transpose();
  p.cov(0, 0) += settings.dilation;
  p.cov(1, 1) += settings.dilation;
  if (!(p.cov.determinant() > 0.0)) return std::nullopt;
  p.mean = Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
  p.depth = pc.z();
  const double ex = std::sqrt(settings.extent_chi2 * p.cov(0, 0));
  const double ey = std::sqrt(settings.extent_chi2 * p.cov(1, 1));
  if (p.mean.x() + ex < 0.0 || p.mean.x() - ex > cam.width - 1 || p.mean.y() + ey < 0.0 ||
      p.mean.y() - ey > cam.height - 1)
    return std::nullopt;
  return p;
}

void RenderGradients::resize(std::size_t n, int sh_count) {
  positions.assign(n, Vec3::Zero());
  rotations.assign(n, Vec4::Zero());
  log_scales.assign(n, Vec3::Zero());
  opacity_logits.assign(n, 0.0);
  sh.assign(n * static_cast<std::size_t>(sh_count) * 3, 0.0);
}

void RenderGradients::set_zero() {
  std::fill(positions.begin(), positions.end(), Vec3::Zero());
  std::fill(rotations.begin(), rotations.end(), Vec4::Zero());
  std::fill(log_scales.begin(), log_scales.end(), Vec3::Zero());
  std::fill(opacity_logits.begin(), opacity_logits.end(), 0.0);
  std::fill(sh.begin(), sh.end(), 0.0);
}

bool RenderGradients::all_finite() const {
  for (const auto& v : positions)
    if (!v.allFinite()) return false;
  for (const auto& v : rotations)
    if (!v.allFinite()) return false;
  for (const auto& v : log_scales)
    if (!v.allFinite()) return false;
  for (double v : opacity_logits)
    if (!std::isfinite(v)) return false;
  for (double v : sh)
    if (!std::isfinite(v)) return false;
  return true;
}

RenderResult render(const GaussianCloud& posed, std::span<const Blend> blends, const Camera& cam,
                    const Vec3& background, const RasterSettings& settings) {
  RenderResult out;
  RenderCache& cache = out.cache;
  setup_cache(cache, posed, blends, cam, background, settings);
  const int tile = settings.tile_size > 0 ? settings.tile_size : std::max(cam.width, cam.height);
  bin_tiles(cache, tile);
  out.color = Image(cam.width, cam.height, 3);
  out.alpha = Image(cam.width, cam.height, 1);
  cache.final_transmittance.assign(static_cast<std::size_t>(cam.width) * cam.height, 1.0);
  cache.clamped.assign(cache.final_transmittance.size(), {false, false, false});

  const long tiles = static_cast<long>(cache.tiles_x) * cache.tiles_y;
  auto do_tile = [&](long t) {
    const int tx = static_cast<int>(t % cache.tiles_x), ty = static_cast<int>(t / cache.tiles_x);
    const std::span<const std::uint32_t> list(cache.tile_entries.data() + cache.tile_offsets[t],
                                              cache.tile_offsets[t + 1] - cache.tile_offsets[t]);
    for (int y = ty * tile; y < std::min(cam.height, (ty + 1) * tile); ++y)
      for (int x = tx * tile; x < std::min(cam.width, (tx + 1) * tile); ++x) shade_pixel(cache, list, x, y, out);
  };
  if (settings.exec == Execution::Serial) {
    for (long t = 0; t < tiles; ++t) do_tile(t);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (long t = 0; t < tiles; ++t) do_tile(t);
  }
  return out;
}

RenderGradients render_backward(const RenderCache& cache, const GaussianCloud& posed, std::span<const Blend> blends,
                                const Image& upstream) {
  check_backward_inputs(cache, posed, blends, upstream);
  const long tiles = static_cast<long>(cache.tiles_x) * cache.tiles_y;
  const int tile = cache.tile_size;
  // One accumulator per tile-list entry; merged afterwards in tile order so the
  // result does not depend on the thread count.
  std::vector<Accum> entry_acc(cache.tile_entries.size());

  auto do_tile = [&](long t, std::vector<Contributor>& scratch) {
    const int tx = static_cast<int>(t % cache.tiles_x), ty = static_cast<int>(t / cache.tiles_x);
    const std::uint32_t begin = cache.tile_offsets[t];
    const std::span<const std::uint32_t> list(cache.tile_entries.data() + begin, cache.tile_offsets[t + 1] - begin);
    for (int y = ty * tile; y < std::min(cache.height, (ty + 1) * tile); ++y)
      for (int x = tx * tile; x < std::min(cache.width, (tx + 1) * tile); ++x)
        backprop_pixel(cache, list, x, y, upstream, scratch,
                       [&](std::uint32_t slot, const Accum& a) { entry_acc[begin + slot].add(a); });
  };
  if (cache.settings.exec == Execution::Serial) {
    std::vector<Contributor> scratch;
    for (long t = 0; t < tiles; ++t) do_tile(t, scratch);
  } else {
#pragma omp parallel
    {
      std::vector<Contributor> scratch;
#pragma omp for schedule(dynamic, 1)
      for (long t = 0; t < tiles; ++t) do_tile(t, scratch);
    }
  }

  std::vector<Accum> acc(posed.size());
  for (std::size_t e = 0; e < cache.tile_entries.size(); ++e) acc[cache.tile_entries[e]].add(entry_acc[e]);

  RenderGradients out;
  out.resize(posed.size(), posed.sh_count());
  chain_all(cache, posed, blends, acc, out);
  return out;
}

RenderResult render_reference(const GaussianCloud& posed, std::span<const Blend> blends, const Camera& cam,
                              const Vec3& background, const RasterSettings& settings) {
  RasterSettings serial = settings;
  serial.exec = Execution::Serial;
  RenderResult out;
  RenderCache& cache = out.cache;
  setup_cache(cache, posed, blends, cam, background, serial);
  bin_tiles(cache, std::max(cam.width, cam.height));
  const auto order = depth_order(cache.splats);
  out.color = Image(cam.width, cam.height, 3);
  out.alpha = Image(cam.width, cam.height, 1);
  cache.final_transmittance.assign(static_cast<std::size_t>(cam.width) * cam.height, 1.0);
  cache.clamped.assign(cache.final_transmittance.size(), {false, false, false});
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) shade_pixel(cache, order, x, y, out);
  return out;
}

RenderGradients render_backward_reference(const RenderCache& cache, const GaussianCloud& posed,
                                          std::span<const Blend> blends, const Image& upstream) {
  check_backward_inputs(cache, posed, blends, upstream);
  const auto order = depth_order(cache.splats);
  std::vector<Accum> acc(posed.size());
  std::vector<Contributor> scratch;
  for (int y = 0; y < cache.height; ++y)
    for (int x = 0; x < cache.width; ++x)
      backprop_pixel(cache, order, x, y, upstream, scratch,
                     [&](std::uint32_t slot, const Accum& a) { acc[order[slot]].add(a); });
  RenderGradients out;
  out.resize(posed.size(), posed.sh_count());
  RenderCache serial = cache;
  serial.settings.exec = Execution::Serial;
  chain_all(serial, posed, blends, acc, out);
  return out;
}

}  // namespace gsg
