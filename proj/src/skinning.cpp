#include "gsgrasp/skinning.hpp"

#include "gsgrasp/spatial_grid.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string_view>
#include <unordered_map>

namespace gsg {

void WeightedTemplate::validate() const {
  if (points.empty()) throw InvalidArgument("weighted template is empty");
  if (bones <= 0 || weights.size() != points.size() * static_cast<std::size_t>(bones))
    throw DimensionError("template weight table does not match point count");
  for (std::size_t i = 0; i < points.size(); ++i) {
    double sum = 0.0;
    for (double w : row(i)) {
      if (w < 0.0) throw InvalidArgument("template weight is negative at point " + std::to_string(i));
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("template weights do not sum to 1 at point " + std::to_string(i));
  }
}

SkinningGrid::SkinningGrid(std::array<int, 3> dims, Aabb bounds, int bones, std::vector<double> palette,
                           std::vector<std::uint32_t> voxel_rows)
    : dims_(dims), bounds_(bounds), bones_(bones), palette_(std::move(palette)), voxel_rows_(std::move(voxel_rows)) {
  for (int d : dims_)
    if (d < 2) throw InvalidArgument("skinning grid needs at least 2 voxels per axis");
  if (!((bounds_.hi.array() > bounds_.lo.array()).all())) throw InvalidArgument("skinning grid bounds are empty");
  if (voxel_rows_.size() != static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2])
    throw DimensionError("voxel table size does not match grid dims");
}

Vec3 SkinningGrid::step() const {
  return (bounds_.hi - bounds_.lo).cwiseQuotient(Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1));
}

Vec3 SkinningGrid::voxel_center(int i, int j, int k) const {
  return bounds_.lo + Vec3(i, j, k).cwiseProduct(step());
}

std::span<const double> SkinningGrid::voxel_weights(int i, int j, int k) const {
  const std::size_t row = voxel_rows_[voxel_index(i, j, k)];
  return {palette_.data() + row * static_cast<std::size_t>(bones_), static_cast<std::size_t>(bones_)};
}

SkinningGrid build_grid(const WeightedTemplate& tmpl, std::array<int, 3> dims, const Aabb& bounds) {
  if (tmpl.points.empty()) throw InvalidArgument("cannot build a skinning grid from an empty template");
  tmpl.validate();
  for (int d : dims)
    if (d < 2) throw InvalidArgument("skinning grid needs at least 2 voxels per axis");

  const SpatialGrid index(tmpl.points, SpatialGrid::cell_for_density(tmpl.points, 2.0));
  const std::size_t voxels = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<std::uint32_t> rows(voxels);
  const Vec3 step = (bounds.hi - bounds.lo).cwiseQuotient(Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1));

#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < dims[0]; ++i) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int k = 0; k < dims[2]; ++k) {
        const Vec3 c = bounds.lo + Vec3(i, j, k).cwiseProduct(step);
        const std::size_t v = (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
        rows[v] = static_cast<std::uint32_t>(index.nearest(c).index);
      }
    }
  }
  return SkinningGrid(dims, bounds, tmpl.bones, tmpl.weights, std::move(rows));
}

Eigen::VectorXd sample_weights(const SkinningGrid& grid, const Vec3& query) {
  const auto& dims = grid.dims();
  const Vec3 step = grid.step();
  const Vec3 q = query.cwiseMax(grid.bounds().lo).cwiseMin(grid.bounds().hi);
  int base[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double f = (q[a] - grid.bounds().lo[a]) / step[a];
    base[a] = std::clamp(static_cast<int>(std::floor(f)), 0, dims[a] - 2);
    t[a] = std::clamp(f - base[a], 0.0, 1.0);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.bones());
  for (int corner = 0; corner < 8; ++corner) {
    const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
    const double c = (di ? t[0] : 1.0 - t[0]) * (dj ? t[1] : 1.0 - t[1]) * (dk ? t[2] : 1.0 - t[2]);
    if (c == 0.0) continue;
    const auto w = grid.voxel_weights(base[0] + di, base[1] + dj, base[2] + dk);
    for (int b = 0; b < grid.bones(); ++b) out[b] += c * w[static_cast<std::size_t>(b)];
  }
  const double sum = out.sum();
  if (sum > 0.0) out /= sum;
  return out;
}

Mat3 polar_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

Quat rotation_quat(const Mat3& r) {
  if (r == Mat3::Identity()) return Quat::Identity();
  return Quat(r).normalized();
}

Blend blend_transforms(std::span<const double> weights, const BoneTransforms& bones) {
  if (weights.size() != bones.size()) throw DimensionError("weight count does not match bone count");
  std::size_t ref = 0;
  for (std::size_t b = 1; b < weights.size(); ++b)
    if (weights[b] > weights[ref]) ref = b;
  // Expanding around the dominant bone keeps one-hot and all-equal blends exact.
  Blend out;
  out.transform = bones.transforms[ref];
  bool rigid = true;
  for (std::size_t b = 0; b < weights.size(); ++b) {
    if (b == ref || weights[b] == 0.0) continue;
    out.transform += weights[b] * (bones.transforms[b] - bones.transforms[ref]);
    if (bones.rotations[b] != bones.rotations[ref]) rigid = false;
  }
  out.rotation = rigid ? bones.rotations[ref] : polar_rotation(out.transform.topLeftCorner<3, 3>());
  return out;
}

namespace {

void apply_one(const GaussianCloud& canonical, const Blend& blend, std::size_t i, GaussianCloud& out) {
  const Mat4& t = blend.transform;
  out.positions[i] = t.topLeftCorner<3, 3>() * canonical.positions[i] + t.topRightCorner<3, 1>();
  out.rotations[i] = rotation_quat(blend.rotation) * canonical.rotations[i];
}

}  // namespace

GaussianCloud apply_blends(const GaussianCloud& canonical, std::span<const Blend> blends, Execution exec) {
  if (blends.size() != canonical.size()) throw DimensionError("blend count does not match cloud size");
  GaussianCloud out = canonical;
  const auto n = static_cast<long>(canonical.size());
  if (exec == Execution::Serial) {
    for (long i = 0; i < n; ++i) apply_one(canonical, blends[i], static_cast<std::size_t>(i), out);
  } else {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) apply_one(canonical, blends[i], static_cast<std::size_t>(i), out);
  }
  return out;
}

PosedCloud pose_cloud(const GaussianCloud& canonical, const SkinningGrid& grid, const BoneTransforms& bones,
                      Execution exec) {
  if (static_cast<std::size_t>(grid.bones()) != bones.size())
    throw DimensionError("grid bone count does not match bone transforms");
  PosedCloud out;
  out.blends.resize(canonical.size());
  const auto n = static_cast<long>(canonical.size());
  auto blend_one = [&](long i) {
    const Eigen::VectorXd w = sample_weights(grid, canonical.positions[static_cast<std::size_t>(i)]);
    out.blends[static_cast<std::size_t>(i)] =
        blend_transforms(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), bones);
  };
  if (exec == Execution::Serial) {
    for (long i = 0; i < n; ++i) blend_one(i);
  } else {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) blend_one(i);
  }
  out.cloud = apply_blends(canonical, out.blends, exec);
  return out;
}

Vec3 canonical_view_dir(const Mat3& blend_rotation, const Vec3& view_dir_posed) {
  return (blend_rotation.transpose() * view_dir_posed).normalized();
}

WeightedTemplate make_segment_template(const SkeletonDef& skel, int samples_per_segment) {
  WeightedTemplate t;
  t.bones = static_cast<int>(skel.bone_count());
  auto add = [&](const Vec3& p, std::size_t bone) {
    t.points.push_back(p);
    const std::size_t base = t.weights.size();
    t.weights.resize(base + static_cast<std::size_t>(t.bones), 0.0);
    t.weights[base + bone] = 1.0;
  };
  const auto& heads = skel.rest_heads();
  for (std::size_t b = 0; b < skel.bone_count(); ++b) {
    const int p = skel.bones()[b].parent;
    if (p < 0) continue;
    for (int s = 0; s < samples_per_segment; ++s) {
      const double u = (s + 0.5) / samples_per_segment;
      add(heads[static_cast<std::size_t>(p)] + u * (heads[b] - heads[static_cast<std::size_t>(p)]),
          static_cast<std::size_t>(p));
    }
  }
  if (t.points.empty()) add(heads[0], 0);
  return t;
}

Aabb skeleton_bounds(const SkeletonDef& skel, double margin) {
  Aabb box{skel.rest_heads()[0], skel.rest_heads()[0]};
  for (const auto& h : skel.rest_heads()) {
    box.lo = box.lo.cwiseMin(h);
    box.hi = box.hi.cwiseMax(h);
  }
  box.lo.array() -= margin;
  box.hi.array() += margin;
  return box;
}

namespace {

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated file " + path.string());
  return v;
}

}  // namespace

void save_template(const WeightedTemplate& tmpl, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pod(out, static_cast<std::uint32_t>(tmpl.points.size()));
  write_pod(out, static_cast<std::uint32_t>(tmpl.bones));
  for (const auto& p : tmpl.points)
    for (int a = 0; a < 3; ++a) write_pod(out, static_cast<float>(p[a]));
  for (double w : tmpl.weights) write_pod(out, static_cast<float>(w));
  if (!out) throw IoError("short write " + path.string());
}

WeightedTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  WeightedTemplate t;
  const auto m = read_pod<std::uint32_t>(in, path);
  t.bones = static_cast<int>(read_pod<std::uint32_t>(in, path));
  t.points.resize(m);
  for (auto& p : t.points)
    for (int a = 0; a < 3; ++a) p[a] = read_pod<float>(in, path);
  t.weights.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(t.bones));
  for (auto& w : t.weights) w = read_pod<float>(in, path);
  return t;
}

void save_grid(const SkinningGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("GSGRID1\n", 8);
  for (int d : grid.dims()) write_pod(out, static_cast<std::uint32_t>(d));
  for (int a = 0; a < 3; ++a) write_pod(out, static_cast<float>(grid.bounds().lo[a]));
  for (int a = 0; a < 3; ++a) write_pod(out, static_cast<float>(grid.bounds().hi[a]));
  write_pod(out, static_cast<std::uint32_t>(grid.bones()));
  std::vector<float> row(static_cast<std::size_t>(grid.bones()));
  for (int i = 0; i < grid.dims()[0]; ++i)
    for (int j = 0; j < grid.dims()[1]; ++j)
      for (int k = 0; k < grid.dims()[2]; ++k) {
        const auto w = grid.voxel_weights(i, j, k);
        std::transform(w.begin(), w.end(), row.begin(), [](double v) { return static_cast<float>(v); });
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
      }
  if (!out) throw IoError("short write " + path.string());
}

SkinningGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "GSGRID1\n", 8) != 0) throw ParseError("bad grid header in " + path.string());
  std::array<int, 3> dims{};
  for (auto& d : dims) d = static_cast<int>(read_pod<std::uint32_t>(in, path));
  Aabb box;
  for (int a = 0; a < 3; ++a) box.lo[a] = read_pod<float>(in, path);
  for (int a = 0; a < 3; ++a) box.hi[a] = read_pod<float>(in, path);
  const int bones = static_cast<int>(read_pod<std::uint32_t>(in, path));
  const std::size_t voxels = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  const std::size_t row_bytes = static_cast<std::size_t>(bones) * sizeof(float);

  // Identical rows share one palette entry.
  std::unordered_map<std::string, std::uint32_t> seen;
  std::vector<double> palette;
  std::vector<std::uint32_t> rows(voxels);
  std::string buf(row_bytes, '\0');
  for (std::size_t v = 0; v < voxels; ++v) {
    in.read(buf.data(), static_cast<std::streamsize>(row_bytes));
    if (!in) throw ParseError("truncated grid weights in " + path.string());
    auto [it, inserted] = seen.try_emplace(buf, static_cast<std::uint32_t>(seen.size()));
    if (inserted) {
      const auto* f = reinterpret_cast<const float*>(buf.data());
      palette.insert(palette.end(), f, f + bones);
    }
    rows[v] = it->second;
  }
  return SkinningGrid(dims, box, bones, std::move(palette), std::move(rows));
}

}  // namespace gsg
