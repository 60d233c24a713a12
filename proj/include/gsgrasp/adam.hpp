#pragma once

#include "gsgrasp/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsg {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
  std::size_t size() const { return m.size(); }
  // Keeps the moment rows of the listed items, `stride` values per item.
  void keep_rows(std::span<const std::size_t> items, std::size_t stride);
};

// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamParams& hp = {});

}  // namespace gsg
