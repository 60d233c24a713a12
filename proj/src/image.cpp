#include "gsgrasp/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace gsg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_png_bytes(const std::filesystem::path& path, int w, int h, int color_type, int channels,
                     const std::vector<std::uint8_t>& bytes) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * w * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Returns bytes with `channels` per pixel (1 = gray, 3 = rgb).
std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path, int& w, int& h, int channels) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw ParseError("not a PNG: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("libpng failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  const int ct = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (ct == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (ct == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (ct & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool gray = !(ct & PNG_COLOR_MASK_COLOR);
  if (channels == 3 && gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * channels);
  for (int y = 0; y < h; ++y) png_read_row(png, bytes.data() + static_cast<std::size_t>(y) * w * channels, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return bytes;
}

}  // namespace

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

void save_png(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 3 && img.channels != 1) throw InvalidArgument("PNG export needs 1 or 3 channels");
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  write_png_bytes(path, img.width, img.height, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                  img.channels, bytes);
}

Image load_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png_bytes(path, w, h, 3);
  Image img(w, h, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

void save_mask_png(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), bytes.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_png_bytes(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1, bytes);
}

Mask load_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png_bytes(path, w, h, 1);
  Mask m(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) m.data[i] = bytes[i] >= 128 ? 1 : 0;
  return m;
}

void save_raw(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("GSIMG1\n", 7);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(img.width), static_cast<std::uint32_t>(img.height),
                                 static_cast<std::uint32_t>(img.channels)};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  std::vector<float> f(img.data.begin(), img.data.end());
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!out) throw IoError("short write " + path.string());
}

Image load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[7];
  in.read(magic, 7);
  if (!in || std::memcmp(magic, "GSIMG1\n", 7) != 0) throw ParseError("bad raw image header: " + path.string());
  std::uint32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  std::vector<float> f(img.data.size());
  in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!in) throw ParseError("truncated raw image: " + path.string());
  std::copy(f.begin(), f.end(), img.data.begin());
  return img;
}

Image load_image(const std::filesystem::path& path) {
  return path.extension() == ".f32" ? load_raw(path) : load_png(path);
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (path.extension() == ".f32")
    save_raw(img, path);
  else
    save_png(img, path);
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (auto& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace gsg
