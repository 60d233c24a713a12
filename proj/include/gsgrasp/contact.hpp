#pragma once

#include "gsgrasp/camera.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"
#include "gsgrasp/skinning.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gsg {

inline constexpr double kDefaultTau = 0.004;

// Nearest cross-cloud distance per Gaussian where it is below tau. The flag
// separates "touching at distance 0" from "no contact".
struct ContactMap {
  double tau = kDefaultTau;
  std::vector<double> hand_distance;
  std::vector<std::uint8_t> hand_contact;
  std::vector<double> object_distance;
  std::vector<std::uint8_t> object_contact;

  std::size_t hand_count() const;
  std::size_t object_count() const;
  // 1 - d/tau for contacts, 0 otherwise.
  std::vector<double> hand_intensity() const;
  std::vector<double> object_intensity() const;
};

enum class AccumulationMode : std::uint32_t {
  Intensity = 0,    // sum of 1 - d/tau
  RawDistance = 1,  // sum of contact distances
};

struct AccumulatedContact {
  double tau = kDefaultTau;
  AccumulationMode mode = AccumulationMode::Intensity;
  std::vector<double> hand_values;
  std::vector<std::uint8_t> hand_touched;  // in contact in at least one frame
  std::vector<double> object_values;
  std::vector<std::uint8_t> object_touched;
  std::uint64_t frames = 0;

  static AccumulatedContact empty(std::size_t hand, std::size_t object, double tau,
                                  AccumulationMode mode = AccumulationMode::Intensity);
};

// Grid-accelerated; identical to the brute-force version.
ContactMap instantaneous_contact(const GaussianCloud& hand, const GaussianCloud& object, double tau,
                                 Execution exec = Execution::Parallel);
ContactMap instantaneous_contact_brute(const GaussianCloud& hand, const GaussianCloud& object, double tau);

AccumulatedContact accumulate(AccumulatedContact acc, const ContactMap& frame);

// Binary mask of the hand Gaussians flagged in `in_contact`, rendered white
// at SH degree 0 and thresholded at alpha >= 0.5.
Mask contact_mask_binary(std::span<const std::uint8_t> in_contact, const GaussianCloud& hand, const Camera& cam);
// Same threshold applied to the whole hand.
Mask silhouette_mask(const GaussianCloud& hand, const Camera& cam);

// Gray render with per-Gaussian intensity (0 = black but still occluding).
Image contact_render_gray(std::span<const double> intensity, const GaussianCloud& hand, const Camera& cam);
// Accumulated values scaled so the largest is 1.
std::vector<double> accumulated_intensity(const AccumulatedContact& acc);

// Binary contact file: "GSCONT1\n", uint32 hand count, uint32 object count,
// float64 tau, uint32 mode, uint64 frame counter, then per hand Gaussian
// (uint8 flag, float64 value) and the same for the object.
void save_contact(const AccumulatedContact& acc, const std::filesystem::path& path);
AccumulatedContact load_contact(const std::filesystem::path& path);
// A single frame stored as a one-frame raw-distance record.
AccumulatedContact as_record(const ContactMap& map);

}  // namespace gsg
