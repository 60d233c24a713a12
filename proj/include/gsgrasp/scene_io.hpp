#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gsg {

// One captured image. Optional paths are empty when absent.
struct FrameEntry {
  std::filesystem::path image;
  std::filesystem::path camera;
  std::filesystem::path pose;
  std::filesystem::path mask;
};

// Capture description. Paths in the file are relative to the manifest's
// directory and are stored resolved here.
//
// {
//   "fps": 30, "subject": "...", "object": "...",
//   "cameras": ["cams/c00.json", ...],
//   "frames": [{"image": ..., "camera": ..., "pose": ..., "mask": ...}, ...],
//   "keypoints": ["kp/t000.json", ...],       per time step, 2D
//   "poses": ["poses/t000.json", ...],        pose sequence
//   "skeleton": ..., "hand": ..., "object_cloud": ..., "grid": ...
// }
struct CaptureManifest {
  std::filesystem::path root;
  double fps = 30.0;
  std::string subject;
  std::string object;
  std::vector<std::filesystem::path> cameras;
  std::vector<Camera> camera_models;  // loaded from `cameras`
  std::vector<FrameEntry> frames;
  std::vector<std::filesystem::path> keypoints;
  std::vector<std::filesystem::path> poses;
  std::filesystem::path skeleton;
  std::filesystem::path hand;
  std::filesystem::path object_cloud;
  std::filesystem::path grid;
};

// Parses, resolves and validates: every referenced file must exist and all
// cameras must share one image size.
CaptureManifest load_manifest(const std::filesystem::path& path);
// Writes paths relative to the manifest's directory.
void save_manifest(const CaptureManifest& m, const std::filesystem::path& path);

// Loads frames into training views; image size must match its camera.
std::vector<TrainView> load_train_views(const CaptureManifest& m, bool need_pose, bool need_mask);

}  // namespace gsg
