#pragma once

#include "gsgrasp/common.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gsg {

// Row-major interleaved image of doubles in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 3, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Binary mask, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, std::uint8_t fill = 0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
};

// 8-bit PNG. Values are clamped to [0,1] and rounded.
void save_png(const Image& img, const std::filesystem::path& path);
Image load_png(const std::filesystem::path& path);
void save_mask_png(const Mask& mask, const std::filesystem::path& path);
Mask load_mask_png(const std::filesystem::path& path);

// Raw float dump: "GSIMG1\n" then width, height, channels as uint32 LE, then
// float32 LE samples.
void save_raw(const Image& img, const std::filesystem::path& path);
Image load_raw(const std::filesystem::path& path);

// Dispatch on extension (.png or .f32).
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

// Rounds every sample to the nearest 8-bit level, as a PNG round trip would.
Image quantize_8bit(const Image& img);

}  // namespace gsg
