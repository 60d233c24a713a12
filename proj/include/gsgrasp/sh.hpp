#pragma once

#include "gsgrasp/common.hpp"

#include <array>

namespace gsg {

inline constexpr double kShC0 = 0.28209479177387814;

// Real SH basis up to degree 3 at unit direction `d`, in the ordering used by
// the splatting PLY convention. `grad` (optional) receives d(basis_k)/d(d).
void sh_basis(int degree, const Vec3& d, std::array<double, 16>& basis, std::array<Vec3, 16>* grad = nullptr);

// RGB = sum_k coeffs[k] * Y_k(d) + 0.5 (unclamped). `coeffs` is [k][rgb].
Vec3 eval_sh(int degree, const double* coeffs, const Vec3& d);

// DC coefficient that renders as constant gray `value`.
inline double sh_dc_for(double value) { return (value - 0.5) / kShC0; }

}  // namespace gsg
