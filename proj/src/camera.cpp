#include "gsgrasp/camera.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace gsg {

using nlohmann::json;

Eigen::Matrix<double, 3, 4> Camera::projection_matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k * world_to_camera.topRows<3>();
}

std::optional<Vec2> Camera::project(const Vec3& world) const {
  const Vec3 c = to_camera(world);
  if (c.z() <= 0.0) return std::nullopt;
  return Vec2(fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy);
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera focal lengths must be positive");
  if (!(near > 0.0) || !(near < far)) throw InvalidArgument("camera requires 0 < near < far");
  if (width <= 0 || height <= 0) throw InvalidArgument("camera image size must be positive");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                       int height, double near, double far) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-12) x = z.cross(Vec3::UnitX());
  x.normalize();
  const Vec3 y = z.cross(x);  // image y points down
  Camera cam;
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = r;
  cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
  cam.fx = cam.fy = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = (width - 1) * 0.5;
  cam.cy = (height - 1) * 0.5;
  cam.near = near;
  cam.far = far;
  return cam;
}

Camera parse_camera(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    Camera c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("w").get<int>();
    c.height = j.at("h").get<int>();
    const auto m = j.at("w2c").get<std::vector<double>>();
    if (m.size() != 16) throw ParseError("camera w2c must have 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 4; ++col) c.world_to_camera(r, col) = m[static_cast<std::size_t>(r * 4 + col)];
    c.near = j.value("near", 0.01);
    c.far = j.value("far", 100.0);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
}

Camera load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_camera(ss.str());
}

std::string camera_to_json(const Camera& c) {
  json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["w"] = c.width;
  j["h"] = c.height;
  std::vector<double> m(16);
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) m[static_cast<std::size_t>(r * 4 + col)] = c.world_to_camera(r, col);
  j["w2c"] = m;
  j["near"] = c.near;
  j["far"] = c.far;
  return j.dump();
}

}  // namespace gsg
