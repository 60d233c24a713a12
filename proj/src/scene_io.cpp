#include "gsgrasp/scene_io.hpp"

#include "gsgrasp/fileio.hpp"

#include <json.hpp>

namespace gsg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& root, const json& j, const char* what) {
  if (!j.is_string()) throw ParseError(std::string("manifest: '") + what + "' must be a path string");
  fs::path p = j.get<std::string>();
  if (p.empty()) throw ParseError(std::string("manifest: empty path for '") + what + "'");
  if (p.is_relative()) p = root / p;
  if (!fs::exists(p)) throw IoError(std::string("manifest references missing ") + what + " file: " + p.string());
  return p;
}

std::string rel_path(const fs::path& p, const fs::path& root) {
  if (p.empty()) return {};
  return p.lexically_relative(root).generic_string();
}

}  // namespace

CaptureManifest load_manifest(const fs::path& path) {
  const std::string text = read_text_file(path);
  CaptureManifest m;
  m.root = path.parent_path();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    m.fps = j.value("fps", 30.0);
    if (!(m.fps > 0.0)) throw ParseError("manifest: fps must be > 0");
    m.subject = j.value("subject", std::string{});
    m.object = j.value("object", std::string{});
    if (j.contains("cameras"))
      for (const auto& c : j.at("cameras")) m.cameras.push_back(resolve(m.root, c, "camera"));
    if (j.contains("frames")) {
      for (const auto& f : j.at("frames")) {
        FrameEntry e;
        e.image = resolve(m.root, f.at("image"), "image");
        e.camera = resolve(m.root, f.at("camera"), "camera");
        if (f.contains("pose") && !f.at("pose").is_null()) e.pose = resolve(m.root, f.at("pose"), "pose");
        if (f.contains("mask") && !f.at("mask").is_null()) e.mask = resolve(m.root, f.at("mask"), "mask");
        m.frames.push_back(std::move(e));
      }
    }
    if (j.contains("keypoints"))
      for (const auto& k : j.at("keypoints")) m.keypoints.push_back(resolve(m.root, k, "keypoint"));
    if (j.contains("poses"))
      for (const auto& p : j.at("poses")) m.poses.push_back(resolve(m.root, p, "pose"));
    if (j.contains("skeleton")) m.skeleton = resolve(m.root, j.at("skeleton"), "skeleton");
    if (j.contains("hand")) m.hand = resolve(m.root, j.at("hand"), "hand cloud");
    if (j.contains("object_cloud")) m.object_cloud = resolve(m.root, j.at("object_cloud"), "object cloud");
    if (j.contains("grid")) m.grid = resolve(m.root, j.at("grid"), "grid");
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }

  for (const auto& c : m.cameras) m.camera_models.push_back(load_camera(c));
  for (std::size_t i = 1; i < m.camera_models.size(); ++i) {
    const Camera& a = m.camera_models.front();
    const Camera& b = m.camera_models[i];
    if (a.width != b.width || a.height != b.height)
      throw DimensionError("camera " + m.cameras[i].string() + " is " + std::to_string(b.width) + "x" +
                           std::to_string(b.height) + ", expected " + std::to_string(a.width) + "x" +
                           std::to_string(a.height));
  }
  return m;
}

void save_manifest(const CaptureManifest& m, const fs::path& path) {
  const fs::path root = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json j;
  j["fps"] = m.fps;
  j["subject"] = m.subject;
  j["object"] = m.object;
  j["cameras"] = json::array();
  for (const auto& c : m.cameras) j["cameras"].push_back(rel_path(c, root));
  j["frames"] = json::array();
  for (const auto& f : m.frames) {
    json jf;
    jf["image"] = rel_path(f.image, root);
    jf["camera"] = rel_path(f.camera, root);
    if (!f.pose.empty()) jf["pose"] = rel_path(f.pose, root);
    if (!f.mask.empty()) jf["mask"] = rel_path(f.mask, root);
    j["frames"].push_back(jf);
  }
  if (!m.keypoints.empty()) {
    j["keypoints"] = json::array();
    for (const auto& k : m.keypoints) j["keypoints"].push_back(rel_path(k, root));
  }
  if (!m.poses.empty()) {
    j["poses"] = json::array();
    for (const auto& p : m.poses) j["poses"].push_back(rel_path(p, root));
  }
  if (!m.skeleton.empty()) j["skeleton"] = rel_path(m.skeleton, root);
  if (!m.hand.empty()) j["hand"] = rel_path(m.hand, root);
  if (!m.object_cloud.empty()) j["object_cloud"] = rel_path(m.object_cloud, root);
  if (!m.grid.empty()) j["grid"] = rel_path(m.grid, root);
  write_text_file(path, j.dump(1) + "\n");
}

std::vector<TrainView> load_train_views(const CaptureManifest& m, bool need_pose, bool need_mask) {
  if (m.frames.empty()) throw InvalidArgument("manifest has no frames");
  std::vector<TrainView> views;
  views.reserve(m.frames.size());
  for (const auto& f : m.frames) {
    TrainView v;
    v.camera = load_camera(f.camera);
    v.image = load_image(f.image);
    if (v.image.width != v.camera.width || v.image.height != v.camera.height)
      throw DimensionError("image " + f.image.string() + " is " + std::to_string(v.image.width) + "x" +
                           std::to_string(v.image.height) + " but its camera expects " +
                           std::to_string(v.camera.width) + "x" + std::to_string(v.camera.height));
    if (v.image.channels != 3) throw DimensionError("image " + f.image.string() + " must be RGB");
    if (need_pose) {
      if (f.pose.empty()) throw InvalidArgument("frame " + f.image.string() + " has no pose");
      v.pose = load_pose(f.pose);
    }
    if (!f.mask.empty()) {
      v.mask = load_mask_png(f.mask);
      if (v.mask.width != v.camera.width || v.mask.height != v.camera.height)
        throw DimensionError("mask " + f.mask.string() + " does not match its camera size");
    } else if (need_mask) {
      throw InvalidArgument("frame " + f.image.string() + " has no mask");
    }
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace gsg
