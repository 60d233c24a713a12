#pragma once

#include "gsgrasp/common.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace gsg {

// Pinhole camera, OpenCV axes (x right, y down, z forward). Pixel (x, y) has
// its center at continuous coordinate (x, y).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  Mat4 world_to_camera = Mat4::Identity();
  double near = 0.01, far = 100.0;

  Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Vec3 center() const { return -rotation().transpose() * translation(); }
  Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }
  Eigen::Matrix<double, 3, 4> projection_matrix() const;

  // Pixel coordinates of a world point; nullopt when not in front of the camera.
  std::optional<Vec2> project(const Vec3& world) const;

  // Throws InvalidArgument on fx/fy <= 0, bad clip planes, or empty image.
  void validate() const;

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                        int height, double near = 0.01, double far = 100.0);
};

Camera parse_camera(const std::string& json_text);
Camera load_camera(const std::filesystem::path& path);
std::string camera_to_json(const Camera& cam);

}  // namespace gsg
