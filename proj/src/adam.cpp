#include "gsgrasp/adam.hpp"

#include <cmath>

namespace gsg {

void AdamState::keep_rows(std::span<const std::size_t> items, std::size_t stride) {
  std::vector<double> nm, nv;
  nm.reserve(items.size() * stride);
  nv.reserve(items.size() * stride);
  for (std::size_t i : items) {
    if ((i + 1) * stride > m.size()) throw DimensionError("optimizer state row out of range");
    nm.insert(nm.end(), m.begin() + static_cast<long>(i * stride), m.begin() + static_cast<long>((i + 1) * stride));
    nv.insert(nv.end(), v.begin() + static_cast<long>(i * stride), v.begin() + static_cast<long>((i + 1) * stride));
  }
  m = std::move(nm);
  v = std::move(nv);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamParams& hp) {
  if (params.size() != grads.size() || params.size() != state.size())
    throw DimensionError("adam: parameter, gradient and state sizes differ (" + std::to_string(params.size()) + ", " +
                         std::to_string(grads.size()) + ", " + std::to_string(state.size()) + ")");
  ++state.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + hp.eps);
  }
}

}  // namespace gsg
