#include "randt/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "randt/trajectory.hpp"

namespace randt {

SlamConfig make_preset(const std::string& name) {
  SlamConfig c;
  c.preset = name;
  if (name == "indoor" || name == "custom") {
    c.ndt.resolution = 0.5;
    c.estimator.alpha = -2.0;
    c.estimator.c = 1.5;
    c.filter.intensity_threshold = 50.0;
  } else if (name == "outdoor") {
    c.ndt.resolution = 1.2;
    c.estimator.alpha = -1.0;
    c.estimator.c = 2.0;
    c.filter.intensity_threshold = 30.0;
    c.filter.max_range = 100.0;
    c.loop.descriptor.max_range = 100.0;
    c.loop.min_separation = 30.0;
    c.keyframe.translation = 2.0;
  } else if (name == "mixed") {
    c.ndt.resolution = 1.0;
    c.estimator.alpha = -1.5;
    c.estimator.c = 2.0;
    c.filter.intensity_threshold = 40.0;
    c.filter.max_range = 50.0;
    c.loop.descriptor.max_range = 50.0;
    c.loop.min_separation = 20.0;
    c.keyframe.translation = 1.0;
  } else if (name == "oxford") {
    c = make_preset("outdoor");
    c.preset = name;
    c.ndt.resolution = 3.5;
    c.filter.intensity_threshold = 70.0;
    c.filter.max_range = 160.0;
    c.loop.descriptor.max_range = 160.0;
    c.keyframe.max_per_submap = 6;
    c.keyframe.translation = 4.0;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

namespace {

using Setter = std::function<void(std::istringstream&)>;

template <typename T>
Setter scalar(T& target) {
  return [&target](std::istringstream& v) {
    if (!(v >> target)) throw ConfigError("expected a number");
  };
}

Setter boolean(bool& target) {
  return [&target](std::istringstream& v) {
    std::string s;
    v >> s;
    if (s == "true" || s == "1") {
      target = true;
    } else if (s == "false" || s == "0") {
      target = false;
    } else {
      throw ConfigError("expected true or false");
    }
  };
}

template <typename Matrix>
Setter diagonal(Matrix& target) {
  return [&target](std::istringstream& v) {
    target.setZero();
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
      if (!(v >> target(i, i))) throw ConfigError("expected " + std::to_string(target.rows()) + " diagonal entries");
      if (target(i, i) < 0.0) throw ConfigError("information entries must be non-negative");
    }
  };
}

std::map<std::string, Setter> setters(SlamConfig& c) {
  std::map<std::string, Setter> s;
  s["filter.intensity_threshold"] = scalar(c.filter.intensity_threshold);
  s["filter.min_range"] = scalar(c.filter.min_range);
  s["filter.max_range"] = scalar(c.filter.max_range);
  s["filter.cluster_gap"] = scalar(c.filter.cluster_gap);
  s["ndt.resolution"] = scalar(c.ndt.resolution);
  s["ndt.scan_resolution"] = scalar(c.scan_resolution);
  s["ndt.min_points"] = scalar(c.ndt.min_points);
  s["ndt.eigen_floor"] = scalar(c.ndt.eigen_floor);
  s["estimator.window_length"] = scalar(c.estimator.window_length);
  s["estimator.alpha"] = scalar(c.estimator.alpha);
  s["estimator.c"] = scalar(c.estimator.c);
  s["estimator.mu0"] = scalar(c.estimator.mu0);
  s["estimator.k_mu"] = scalar(c.estimator.k_mu);
  s["estimator.w_ndt"] = scalar(c.estimator.w_ndt);
  s["estimator.omega_mm"] = diagonal(c.estimator.omega_mm);
  s["estimator.omega_imu"] = diagonal(c.estimator.omega_imu);
  s["estimator.k_neighbors"] = scalar(c.estimator.k_neighbors);
  s["estimator.max_lm_iterations"] = scalar(c.estimator.max_lm_iterations);
  s["estimator.association_rounds"] = scalar(c.estimator.association_rounds);
  s["estimator.d1"] = scalar(c.estimator.d1);
  s["estimator.d2"] = scalar(c.estimator.d2);
  s["graph.omega_od"] = diagonal(c.graph.omega_od);
  s["graph.omega_lo"] = diagonal(c.graph.omega_lo);
  s["graph.max_iterations"] = scalar(c.graph.lm.max_iterations);
  s["loop.enabled"] = boolean(c.loop.enabled);
  s["loop.rings"] = scalar(c.loop.descriptor.rings);
  s["loop.sectors"] = scalar(c.loop.descriptor.sectors);
  s["loop.max_range"] = scalar(c.loop.descriptor.max_range);
  s["loop.w_od"] = scalar(c.loop.w_od);
  s["loop.min_separation"] = scalar(c.loop.min_separation);
  s["loop.gate"] = scalar(c.loop.gate);
  s["loop.gate_radius"] = scalar(c.loop.gate_radius);
  s["loop.gate_sigma"] = scalar(c.loop.gate_sigma);
  s["loop.drift_allowance"] = scalar(c.loop.drift_allowance);
  s["loop.drift_ratio"] = scalar(c.loop.drift_ratio);
  s["keyframe.translation"] = scalar(c.keyframe.translation);
  s["keyframe.rotation_deg"] = scalar(c.keyframe.rotation_deg);
  s["keyframe.max_per_submap"] = scalar(c.keyframe.max_per_submap);
  s["keyframe.submap_overlap"] = scalar(c.keyframe.submap_overlap);
  s["imu.enabled"] = boolean(c.use_imu);
  return s;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void validate(const SlamConfig& c, const std::string& source) {
  auto fail = [&](const std::string& what) { throw ConfigError(source + ": " + what); };
  if (!(c.ndt.resolution > 0.0)) fail("ndt.resolution must be positive");
  if (c.ndt.min_points < 2) fail("ndt.min_points must be at least 2");
  if (c.estimator.window_length < 1) fail("estimator.window_length must be at least 1");
  if (!(c.estimator.c > 0.0)) fail("estimator.c must be positive");
  if (!(c.estimator.mu0 >= 1.0)) fail("estimator.mu0 must be >= 1");
  if (!(c.estimator.k_mu > 1.0)) fail("estimator.k_mu must be > 1");
  if (c.estimator.k_neighbors < 1) fail("estimator.k_neighbors must be at least 1");
  if (c.keyframe.max_per_submap < 1) fail("keyframe.max_per_submap must be at least 1");
  if (c.keyframe.submap_overlap < 0) fail("keyframe.submap_overlap must be non-negative");
  if (c.loop.descriptor.rings < 1 || c.loop.descriptor.sectors < 1 || !(c.loop.descriptor.max_range > 0.0)) {
    fail("loop descriptor dimensions must be positive");
  }
}

}  // namespace

SlamConfig parse_config(std::istream& is, const std::string& source) {
  SlamConfig cfg = make_preset("indoor");
  auto table = setters(cfg);
  std::string line;
  int line_no = 0;
  bool seen_other = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::istringstream value(trim(line.substr(eq + 1)));
    if (key == "preset") {
      if (seen_other) throw ConfigError(where + "preset must precede all other keys");
      std::string name;
      value >> name;
      try {
        cfg = make_preset(name);
      } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
      }
      table = setters(cfg);
      continue;
    }
    seen_other = true;
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second(value);
      std::string rest;
      if (value >> rest) throw ConfigError("trailing characters");
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  validate(cfg, source);
  return cfg;
}

SlamConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  return parse_config(is, path.string());
}

void write_config(std::ostream& os, const SlamConfig& c) {
  auto kv = [&os](const char* key, double v) { os << key << " = " << format_number(v) << '\n'; };
  auto diag = [&os](const char* key, const auto& m) {
    os << key << " =";
    for (Eigen::Index i = 0; i < m.rows(); ++i) os << ' ' << format_number(m(i, i));
    os << '\n';
  };
  auto flag = [&os](const char* key, bool v) { os << key << " = " << (v ? "true" : "false") << '\n'; };
  os << "preset = " << c.preset << '\n';
  kv("filter.intensity_threshold", c.filter.intensity_threshold);
  kv("filter.min_range", c.filter.min_range);
  kv("filter.max_range", c.filter.max_range);
  kv("filter.cluster_gap", c.filter.cluster_gap);
  kv("ndt.resolution", c.ndt.resolution);
  kv("ndt.scan_resolution", c.scan_resolution);
  kv("ndt.min_points", c.ndt.min_points);
  kv("ndt.eigen_floor", c.ndt.eigen_floor);
  kv("estimator.window_length", c.estimator.window_length);
  kv("estimator.alpha", c.estimator.alpha);
  kv("estimator.c", c.estimator.c);
  kv("estimator.mu0", c.estimator.mu0);
  kv("estimator.k_mu", c.estimator.k_mu);
  kv("estimator.w_ndt", c.estimator.w_ndt);
  diag("estimator.omega_mm", c.estimator.omega_mm);
  diag("estimator.omega_imu", c.estimator.omega_imu);
  kv("estimator.k_neighbors", c.estimator.k_neighbors);
  kv("estimator.max_lm_iterations", c.estimator.max_lm_iterations);
  kv("estimator.association_rounds", c.estimator.association_rounds);
  kv("estimator.d1", c.estimator.d1);
  kv("estimator.d2", c.estimator.d2);
  diag("graph.omega_od", c.graph.omega_od);
  diag("graph.omega_lo", c.graph.omega_lo);
  kv("graph.max_iterations", c.graph.lm.max_iterations);
  flag("loop.enabled", c.loop.enabled);
  kv("loop.rings", c.loop.descriptor.rings);
  kv("loop.sectors", c.loop.descriptor.sectors);
  kv("loop.max_range", c.loop.descriptor.max_range);
  kv("loop.w_od", c.loop.w_od);
  kv("loop.min_separation", c.loop.min_separation);
  kv("loop.gate", c.loop.gate);
  kv("loop.gate_radius", c.loop.gate_radius);
  kv("loop.gate_sigma", c.loop.gate_sigma);
  kv("loop.drift_allowance", c.loop.drift_allowance);
  kv("loop.drift_ratio", c.loop.drift_ratio);
  kv("keyframe.translation", c.keyframe.translation);
  kv("keyframe.rotation_deg", c.keyframe.rotation_deg);
  kv("keyframe.max_per_submap", c.keyframe.max_per_submap);
  kv("keyframe.submap_overlap", c.keyframe.submap_overlap);
  flag("imu.enabled", c.use_imu);
}

}  // namespace randt
