#include "gsgrasp/contact.hpp"

#include "gsgrasp/rasterizer.hpp"
#include "gsgrasp/sh.hpp"
#include "gsgrasp/spatial_grid.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

namespace gsg {

namespace {

std::size_t count_flags(const std::vector<std::uint8_t>& f) {
  return static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](std::uint8_t v) { return v != 0; }));
}

std::vector<double> intensity_of(const std::vector<double>& d, const std::vector<std::uint8_t>& f, double tau) {
  std::vector<double> out(d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (f[i]) out[i] = std::clamp(1.0 - d[i] / tau, 0.0, 1.0);
  return out;
}

void check_inputs(const GaussianCloud& hand, const GaussianCloud& object, double tau) {
  if (hand.empty() || object.empty()) throw InvalidArgument("contact needs non-empty hand and object clouds");
  if (!(tau > 0.0)) throw InvalidArgument("contact threshold tau must be > 0");
}

// For every source point: nearest target distance if it is below tau.
void side_grid(std::span<const Vec3> src, std::span<const Vec3> dst, double tau, Execution exec,
               std::vector<double>& dist, std::vector<std::uint8_t>& flag) {
  const SpatialGrid grid(dst, tau);
  dist.assign(src.size(), 0.0);
  flag.assign(src.size(), 0);
  auto one = [&](long i) {
    const Vec3& p = src[static_cast<std::size_t>(i)];
    double best = std::numeric_limits<double>::infinity();
    grid.for_each_candidate(p, tau, [&](long j) { best = std::min(best, (p - dst[static_cast<std::size_t>(j)]).norm()); });
    if (best < tau) {
      dist[static_cast<std::size_t>(i)] = best;
      flag[static_cast<std::size_t>(i)] = 1;
    }
  };
  const auto n = static_cast<long>(src.size());
  if (exec == Execution::Serial) {
    for (long i = 0; i < n; ++i) one(i);
  } else {
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i) one(i);
  }
}

void side_brute(std::span<const Vec3> src, std::span<const Vec3> dst, double tau, std::vector<double>& dist,
                std::vector<std::uint8_t>& flag) {
  dist.assign(src.size(), 0.0);
  flag.assign(src.size(), 0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : dst) best = std::min(best, (src[i] - q).norm());
    if (best < tau) {
      dist[i] = best;
      flag[i] = 1;
    }
  }
}

GaussianCloud contact_cloud(const GaussianCloud& hand, std::span<const double> gray) {
  GaussianCloud c;
  c.sh_degree = 0;
  c.reserve(hand.size());
  for (std::size_t i = 0; i < hand.size(); ++i) {
    const double dc = sh_dc_for(gray[i]);
    const double rgb[3] = {dc, dc, dc};
    c.push_back(hand.positions[i], hand.rotations[i], hand.log_scales[i], hand.opacity_logits[i], rgb);
  }
  return c;
}

Mask threshold_alpha(const Image& alpha) {
  Mask m(alpha.width, alpha.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = alpha.data[i] >= 0.5 ? 1 : 0;
  return m;
}

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated contact file " + path.string());
  return v;
}

}  // namespace

std::size_t ContactMap::hand_count() const { return count_flags(hand_contact); }
std::size_t ContactMap::object_count() const { return count_flags(object_contact); }
std::vector<double> ContactMap::hand_intensity() const { return intensity_of(hand_distance, hand_contact, tau); }
std::vector<double> ContactMap::object_intensity() const { return intensity_of(object_distance, object_contact, tau); }

AccumulatedContact AccumulatedContact::empty(std::size_t hand, std::size_t object, double tau, AccumulationMode mode) {
  if (!(tau > 0.0)) throw InvalidArgument("contact threshold tau must be > 0");
  AccumulatedContact a;
  a.tau = tau;
  a.mode = mode;
  a.hand_values.assign(hand, 0.0);
  a.hand_touched.assign(hand, 0);
  a.object_values.assign(object, 0.0);
  a.object_touched.assign(object, 0);
  return a;
}

ContactMap instantaneous_contact(const GaussianCloud& hand, const GaussianCloud& object, double tau, Execution exec) {
  check_inputs(hand, object, tau);
  ContactMap m;
  m.tau = tau;
  side_grid(hand.positions, object.positions, tau, exec, m.hand_distance, m.hand_contact);
  side_grid(object.positions, hand.positions, tau, exec, m.object_distance, m.object_contact);
  return m;
}

ContactMap instantaneous_contact_brute(const GaussianCloud& hand, const GaussianCloud& object, double tau) {
  check_inputs(hand, object, tau);
  ContactMap m;
  m.tau = tau;
  side_brute(hand.positions, object.positions, tau, m.hand_distance, m.hand_contact);
  side_brute(object.positions, hand.positions, tau, m.object_distance, m.object_contact);
  return m;
}

AccumulatedContact accumulate(AccumulatedContact acc, const ContactMap& frame) {
  if (acc.hand_values.size() != frame.hand_distance.size() || acc.object_values.size() != frame.object_distance.size())
    throw DimensionError("contact frame sizes (" + std::to_string(frame.hand_distance.size()) + ", " +
                         std::to_string(frame.object_distance.size()) + ") do not match the accumulator (" +
                         std::to_string(acc.hand_values.size()) + ", " + std::to_string(acc.object_values.size()) +
                         ")");
  if (acc.tau != frame.tau) throw InvalidArgument("contact frame tau differs from the accumulator");
  auto add = [&](std::vector<double>& vals, std::vector<std::uint8_t>& touched, const std::vector<double>& d,
                 const std::vector<std::uint8_t>& f) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!f[i]) continue;
      vals[i] += acc.mode == AccumulationMode::Intensity ? std::clamp(1.0 - d[i] / acc.tau, 0.0, 1.0) : d[i];
      touched[i] = 1;
    }
  };
  add(acc.hand_values, acc.hand_touched, frame.hand_distance, frame.hand_contact);
  add(acc.object_values, acc.object_touched, frame.object_distance, frame.object_contact);
  ++acc.frames;
  return acc;
}

Mask contact_mask_binary(std::span<const std::uint8_t> in_contact, const GaussianCloud& hand, const Camera& cam) {
  if (in_contact.size() != hand.size()) throw DimensionError("contact flags do not match the hand cloud");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < in_contact.size(); ++i)
    if (in_contact[i]) keep.push_back(i);
  const GaussianCloud sub = hand.subset(keep);
  const std::vector<double> white(sub.size(), 1.0);
  return threshold_alpha(render(contact_cloud(sub, white), {}, cam, Vec3::Zero()).alpha);
}

Mask silhouette_mask(const GaussianCloud& hand, const Camera& cam) {
  const std::vector<double> white(hand.size(), 1.0);
  return threshold_alpha(render(contact_cloud(hand, white), {}, cam, Vec3::Zero()).alpha);
}

Image contact_render_gray(std::span<const double> intensity, const GaussianCloud& hand, const Camera& cam) {
  if (intensity.size() != hand.size()) throw DimensionError("contact intensities do not match the hand cloud");
  std::vector<double> gray(intensity.begin(), intensity.end());
  for (double& g : gray) g = std::clamp(g, 0.0, 1.0);
  return render(contact_cloud(hand, gray), {}, cam, Vec3::Zero()).color;
}

std::vector<double> accumulated_intensity(const AccumulatedContact& acc) {
  const double top =
      acc.hand_values.empty() ? 0.0 : *std::max_element(acc.hand_values.begin(), acc.hand_values.end());
  std::vector<double> out(acc.hand_values.size(), 0.0);
  if (top > 0.0)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = acc.hand_values[i] / top;
  return out;
}

AccumulatedContact as_record(const ContactMap& map) {
  AccumulatedContact a;
  a.tau = map.tau;
  a.mode = AccumulationMode::RawDistance;
  a.hand_values = map.hand_distance;
  a.hand_touched = map.hand_contact;
  a.object_values = map.object_distance;
  a.object_touched = map.object_contact;
  a.frames = 1;
  return a;
}

void save_contact(const AccumulatedContact& acc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("GSCONT1\n", 8);
  put(out, static_cast<std::uint32_t>(acc.hand_values.size()));
  put(out, static_cast<std::uint32_t>(acc.object_values.size()));
  put(out, acc.tau);
  put(out, static_cast<std::uint32_t>(acc.mode));
  put(out, static_cast<std::uint64_t>(acc.frames));
  for (std::size_t i = 0; i < acc.hand_values.size(); ++i) {
    put(out, acc.hand_touched[i]);
    put(out, acc.hand_values[i]);
  }
  for (std::size_t i = 0; i < acc.object_values.size(); ++i) {
    put(out, acc.object_touched[i]);
    put(out, acc.object_values[i]);
  }
  if (!out) throw IoError("short write " + path.string());
}

AccumulatedContact load_contact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "GSCONT1\n", 8) != 0) throw ParseError("bad contact header in " + path.string());
  AccumulatedContact a;
  const auto nh = get<std::uint32_t>(in, path);
  const auto no = get<std::uint32_t>(in, path);
  a.tau = get<double>(in, path);
  const auto mode = get<std::uint32_t>(in, path);
  if (mode > 1) throw ParseError("unknown accumulation mode in " + path.string());
  a.mode = static_cast<AccumulationMode>(mode);
  a.frames = get<std::uint64_t>(in, path);
  a.hand_values.resize(nh);
  a.hand_touched.resize(nh);
  for (std::uint32_t i = 0; i < nh; ++i) {
    a.hand_touched[i] = get<std::uint8_t>(in, path);
    a.hand_values[i] = get<double>(in, path);
  }
  a.object_values.resize(no);
  a.object_touched.resize(no);
  for (std::uint32_t i = 0; i < no; ++i) {
    a.object_touched[i] = get<std::uint8_t>(in, path);
    a.object_values[i] = get<double>(in, path);
  }
  return a;
}

}  // namespace gsg
