#include "gsgrasp/gaussian_cloud.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace gsg {

namespace {

std::vector<std::string> property_names(int sh_count, bool with_bones) {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 3 * (sh_count - 1); ++i) names.push_back("f_rest_" + std::to_string(i));
  names.push_back("opacity");
  for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
  if (with_bones) names.push_back("bone_id");
  return names;
}

}  // namespace

void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
  cloud.validate();
  const int c = cloud.sh_count();
  const bool bones = !cloud.bone_ids.empty();
  const auto names = property_names(c, bones);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
  for (const auto& n : names) out << "property float " << n << "\n";
  out << "end_header\n";

  std::vector<float> row(names.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::size_t k = 0;
    for (int a = 0; a < 3; ++a) row[k++] = static_cast<float>(cloud.positions[i][a]);
    for (int a = 0; a < 3; ++a) row[k++] = 0.0f;
    const double* sh = cloud.sh_ptr(i);
    for (int ch = 0; ch < 3; ++ch) row[k++] = static_cast<float>(sh[ch]);
    // f_rest is channel-major: all R coefficients, then G, then B.
    for (int ch = 0; ch < 3; ++ch)
      for (int j = 1; j < c; ++j) row[k++] = static_cast<float>(sh[j * 3 + ch]);
    row[k++] = static_cast<float>(cloud.opacity_logits[i]);
    for (int a = 0; a < 3; ++a) row[k++] = static_cast<float>(cloud.log_scales[i][a]);
    const Quat& q = cloud.rotations[i];
    row[k++] = static_cast<float>(q.w());
    row[k++] = static_cast<float>(q.x());
    row[k++] = static_cast<float>(q.y());
    row[k++] = static_cast<float>(q.z());
    if (bones) row[k++] = static_cast<float>(cloud.bone_ids[i]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write " + path.string());
}

GaussianCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw ParseError("missing ply magic in " + path.string());
  std::size_t count = 0;
  bool have_vertex = false;
  bool in_vertex = false;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw ParseError("unsupported PLY format '" + fmt + "'");
    } else if (tok == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) {
        ls >> count;
        have_vertex = true;
      } else if (have_vertex) {
        throw ParseError("unsupported PLY element '" + name + "'");
      }
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type != "float" && type != "float32") throw ParseError("property '" + name + "' is not float");
      names.push_back(name);
    }
  }
  if (line != "end_header") throw ParseError("unterminated PLY header");
  if (!have_vertex) throw ParseError("PLY has no vertex element");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < names.size(); ++i) col[names[i]] = i;
  auto require = [&](const std::string& n) {
    const auto it = col.find(n);
    if (it == col.end()) throw ParseError("PLY is missing attribute '" + n + "'");
    return it->second;
  };
  std::size_t rest = 0;
  while (col.count("f_rest_" + std::to_string(rest))) ++rest;
  if (rest % 3 != 0) throw ParseError("f_rest attribute count " + std::to_string(rest) + " is not a multiple of 3");
  const int c = static_cast<int>(rest / 3) + 1;
  int degree = -1;
  for (int d = 0; d <= 3; ++d)
    if (sh_coeff_count(d) == c) degree = d;
  if (degree < 0) throw ParseError("f_rest attribute count does not match an SH degree");

  std::size_t pos[3], dc[3], scale[3], rot[4];
  for (int a = 0; a < 3; ++a) {
    pos[a] = require(std::string(1, "xyz"[a]));
    dc[a] = require("f_dc_" + std::to_string(a));
    scale[a] = require("scale_" + std::to_string(a));
  }
  for (int a = 0; a < 4; ++a) rot[a] = require("rot_" + std::to_string(a));
  const std::size_t opacity = require("opacity");
  const auto bone_it = col.find("bone_id");
  std::vector<std::size_t> rest_col(rest);
  for (std::size_t r = 0; r < rest; ++r) rest_col[r] = col["f_rest_" + std::to_string(r)];

  GaussianCloud cloud;
  cloud.sh_degree = degree;
  cloud.reserve(count);
  std::vector<float> row(names.size());
  std::vector<double> sh(static_cast<std::size_t>(c) * 3);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw ParseError("PLY body truncated at vertex " + std::to_string(i));
    for (int ch = 0; ch < 3; ++ch) sh[static_cast<std::size_t>(ch)] = row[dc[ch]];
    for (int ch = 0; ch < 3; ++ch)
      for (int j = 1; j < c; ++j)
        sh[static_cast<std::size_t>(j * 3 + ch)] = row[rest_col[static_cast<std::size_t>(ch * (c - 1) + j - 1)]];
    Quat q(row[rot[0]], row[rot[1]], row[rot[2]], row[rot[3]]);
    const int bone = bone_it == col.end() ? -1 : static_cast<int>(row[bone_it->second]);
    cloud.push_back({row[pos[0]], row[pos[1]], row[pos[2]]}, q, {row[scale[0]], row[scale[1]], row[scale[2]]},
                    row[opacity], sh, bone);
  }
  if (bone_it != col.end() && cloud.bone_ids.empty() && count > 0) cloud.bone_ids.assign(count, -1);
  return cloud;
}

}  // namespace gsg
