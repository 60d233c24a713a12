#pragma once

#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/pose_fit.hpp"
#include "gsgrasp/training.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gsg {

// Everything a CLI run can override. Loaded from a TOML-style file:
//
//   # comment
//   [train]
//   iterations = 2000
//   background = [0, 0, 0]
//
// Keys are "<section>.<name>"; unknown keys are rejected by name.
struct RunConfig {
  TrainConfig train;
  InitOptions init;
  std::size_t gaussians_per_bone = 60;
  std::size_t object_gaussians = 2000;
  double object_radius = 0.05;
  std::optional<Vec3> object_center;  // default: where the cameras look
  std::array<int, 3> grid_dims{48, 48, 48};
  double grid_margin = 0.02;
  int template_samples = 16;
  IkOptions ik;
  OneEuroParams filter;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// All accepted keys, for help output.
std::vector<std::string> config_keys();

}  // namespace gsg
