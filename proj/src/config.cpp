#include "gsgrasp/config.hpp"

#include "gsgrasp/fileio.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace gsg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

struct Value {
  std::string key;
  std::string text;
  int line;

  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("config key '" + key + "' (line " + std::to_string(line) + "): " + what);
  }

  double number() const {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("expected a number, got '" + text + "'");
    return v;
  }

  long integer() const {
    const double v = number();
    if (v != static_cast<double>(static_cast<long>(v))) fail("expected an integer, got '" + text + "'");
    return static_cast<long>(v);
  }

  std::size_t count() const {
    const long v = integer();
    if (v < 0) fail("expected a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  std::vector<double> numbers(std::size_t n) const {
    if (text.size() < 2 || text.front() != '[' || text.back() != ']') fail("expected an array [..]");
    std::vector<double> out;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(Value{key, trim(item), line}.number());
    if (out.size() != n) fail("expected " + std::to_string(n) + " values");
    return out;
  }

  Vec3 vec3() const {
    const auto v = numbers(3);
    return {v[0], v[1], v[2]};
  }
};

using Setter = std::function<void(RunConfig&, const Value&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"train.iterations", [](RunConfig& c, const Value& v) { c.train.iterations = static_cast<int>(v.count()); }},
      {"train.accumulation", [](RunConfig& c, const Value& v) { c.train.accumulation = static_cast<int>(v.integer()); }},
      {"train.prune_interval", [](RunConfig& c, const Value& v) { c.train.prune_interval = static_cast<int>(v.count()); }},
      {"train.prune_threshold", [](RunConfig& c, const Value& v) { c.train.prune_threshold = v.number(); }},
      {"train.mask_cull_interval",
       [](RunConfig& c, const Value& v) { c.train.mask_cull_interval = static_cast<int>(v.count()); }},
      {"train.cull_min_views", [](RunConfig& c, const Value& v) { c.train.cull_min_views = v.count(); }},
      {"train.iso_target", [](RunConfig& c, const Value& v) { c.train.iso_target = v.number(); }},
      {"train.seed", [](RunConfig& c, const Value& v) { c.train.seed = v.count(); }},
      {"train.background", [](RunConfig& c, const Value& v) { c.train.background = v.vec3(); }},
      {"train.tile_size", [](RunConfig& c, const Value& v) { c.train.raster.tile_size = static_cast<int>(v.integer()); }},
      {"lr.positions", [](RunConfig& c, const Value& v) { c.train.lr.positions = v.number(); }},
      {"lr.rotations", [](RunConfig& c, const Value& v) { c.train.lr.rotations = v.number(); }},
      {"lr.log_scales", [](RunConfig& c, const Value& v) { c.train.lr.log_scales = v.number(); }},
      {"lr.opacity", [](RunConfig& c, const Value& v) { c.train.lr.opacity = v.number(); }},
      {"lr.sh", [](RunConfig& c, const Value& v) { c.train.lr.sh = v.number(); }},
      {"weights.l1", [](RunConfig& c, const Value& v) { c.train.weights.l1 = v.number(); }},
      {"weights.ssim", [](RunConfig& c, const Value& v) { c.train.weights.ssim = v.number(); }},
      {"weights.perceptual", [](RunConfig& c, const Value& v) { c.train.weights.perceptual = v.number(); }},
      {"weights.iso", [](RunConfig& c, const Value& v) { c.train.weights.iso = v.number(); }},
      {"init.gaussians_per_bone", [](RunConfig& c, const Value& v) { c.gaussians_per_bone = v.count(); }},
      {"init.sigma_factor", [](RunConfig& c, const Value& v) { c.init.sigma_factor = v.number(); }},
      {"init.scale_factor", [](RunConfig& c, const Value& v) { c.init.scale_factor = v.number(); }},
      {"init.opacity", [](RunConfig& c, const Value& v) { c.init.initial_opacity = v.number(); }},
      {"init.sh_degree", [](RunConfig& c, const Value& v) { c.init.sh_degree = static_cast<int>(v.count()); }},
      {"init.base_gray", [](RunConfig& c, const Value& v) { c.init.base_gray = v.number(); }},
      {"object.gaussians", [](RunConfig& c, const Value& v) { c.object_gaussians = v.count(); }},
      {"object.radius", [](RunConfig& c, const Value& v) { c.object_radius = v.number(); }},
      {"object.center", [](RunConfig& c, const Value& v) { c.object_center = v.vec3(); }},
      {"grid.dims",
       [](RunConfig& c, const Value& v) {
         const auto d = v.numbers(3);
         for (int a = 0; a < 3; ++a) {
           c.grid_dims[static_cast<std::size_t>(a)] = static_cast<int>(d[static_cast<std::size_t>(a)]);
           if (d[static_cast<std::size_t>(a)] < 2) v.fail("grid dims must be >= 2");
         }
       }},
      {"grid.margin", [](RunConfig& c, const Value& v) { c.grid_margin = v.number(); }},
      {"grid.template_samples", [](RunConfig& c, const Value& v) { c.template_samples = static_cast<int>(v.count()); }},
      {"ik.iterations", [](RunConfig& c, const Value& v) { c.ik.iterations = static_cast<int>(v.count()); }},
      {"ik.lambda", [](RunConfig& c, const Value& v) { c.ik.lambda = v.number(); }},
      {"ik.lr", [](RunConfig& c, const Value& v) { c.ik.lr = v.number(); }},
      {"ik.tolerance", [](RunConfig& c, const Value& v) { c.ik.tolerance = v.number(); }},
      {"filter.min_cutoff", [](RunConfig& c, const Value& v) { c.filter.min_cutoff = v.number(); }},
      {"filter.beta", [](RunConfig& c, const Value& v) { c.filter.beta = v.number(); }},
      {"filter.d_cutoff", [](RunConfig& c, const Value& v) { c.filter.d_cutoff = v.number(); }},
      {"filter.rate", [](RunConfig& c, const Value& v) { c.filter.rate = v.number(); }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[' && s.back() == ']' && s.find('=') == std::string::npos) {
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    std::string value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const auto it = setters().find(key);
    if (it == setters().end())
      throw InvalidArgument("unknown config key '" + key + "' (line " + std::to_string(line) + ")");
    it->second(cfg, Value{key, value, line});
  }
  cfg.train.validate();
  cfg.filter.validate();
  if (!(cfg.object_radius > 0.0)) throw InvalidArgument("config key 'object.radius' must be > 0");
  if (cfg.init.sh_degree > 3) throw InvalidArgument("config key 'init.sh_degree' must be <= 3");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

}  // namespace gsg
