#include "gsgrasp/sh.hpp"

namespace gsg {

namespace {
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                           -0.4570457994644658, 1.445305721320277, -0.5900435899266435};
}  // namespace

void sh_basis(int degree, const Vec3& d, std::array<double, 16>& y, std::array<Vec3, 16>* grad) {
  const double x = d.x(), yy = d.y(), z = d.z();
  y.fill(0.0);
  if (grad) grad->fill(Vec3::Zero());
  y[0] = kShC0;
  if (degree < 1) return;
  y[1] = -kC1 * yy;
  y[2] = kC1 * z;
  y[3] = -kC1 * x;
  if (grad) {
    auto& g = *grad;
    g[1] = {0, -kC1, 0};
    g[2] = {0, 0, kC1};
    g[3] = {-kC1, 0, 0};
  }
  if (degree < 2) return;
  const double xx = x * x, y2 = yy * yy, zz = z * z;
  y[4] = kC2[0] * x * yy;
  y[5] = kC2[1] * yy * z;
  y[6] = kC2[2] * (2.0 * zz - xx - y2);
  y[7] = kC2[3] * x * z;
  y[8] = kC2[4] * (xx - y2);
  if (grad) {
    auto& g = *grad;
    g[4] = {kC2[0] * yy, kC2[0] * x, 0};
    g[5] = {0, kC2[1] * z, kC2[1] * yy};
    g[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * yy, 4.0 * kC2[2] * z};
    g[7] = {kC2[3] * z, 0, kC2[3] * x};
    g[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * yy, 0};
  }
  if (degree < 3) return;
  y[9] = kC3[0] * yy * (3.0 * xx - y2);
  y[10] = kC3[1] * x * yy * z;
  y[11] = kC3[2] * yy * (4.0 * zz - xx - y2);
  y[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2);
  y[13] = kC3[4] * x * (4.0 * zz - xx - y2);
  y[14] = kC3[5] * z * (xx - y2);
  y[15] = kC3[6] * x * (xx - 3.0 * y2);
  if (grad) {
    auto& g = *grad;
    g[9] = {6.0 * kC3[0] * x * yy, kC3[0] * (3.0 * xx - 3.0 * y2), 0};
    g[10] = {kC3[1] * yy * z, kC3[1] * x * z, kC3[1] * x * yy};
    g[11] = {-2.0 * kC3[2] * x * yy, kC3[2] * (4.0 * zz - xx - 3.0 * y2), 8.0 * kC3[2] * yy * z};
    g[12] = {-6.0 * kC3[3] * x * z, -6.0 * kC3[3] * yy * z, kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * y2)};
    g[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - y2), -2.0 * kC3[4] * x * yy, 8.0 * kC3[4] * x * z};
    g[14] = {2.0 * kC3[5] * x * z, -2.0 * kC3[5] * yy * z, kC3[5] * (xx - y2)};
    g[15] = {kC3[6] * (3.0 * xx - 3.0 * y2), -6.0 * kC3[6] * x * yy, 0};
  }
}

Vec3 eval_sh(int degree, const double* coeffs, const Vec3& d) {
  std::array<double, 16> y;
  sh_basis(degree, d, y);
  const int n = (degree + 1) * (degree + 1);
  Vec3 c = Vec3::Constant(0.5);
  for (int k = 0; k < n; ++k)
    for (int ch = 0; ch < 3; ++ch) c[ch] += coeffs[k * 3 + ch] * y[static_cast<std::size_t>(k)];
  return c;
}

}  // namespace gsg
