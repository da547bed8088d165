#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "randt/estimator.hpp"
#include "randt/loop_closure.hpp"
#include "randt/ndt.hpp"
#include "randt/pose_graph.hpp"
#include "randt/radar.hpp"

namespace randt {

struct KeyframeConfig {
  double translation = 0.5;   // m since the last keyframe
  double rotation_deg = 10.0;  // deg since the last keyframe
  int max_per_submap = 10;
  int submap_overlap = 2;  // previous keyframe scans seeded into a new submap
};

struct SlamConfig {
  std::string preset = "indoor";
  FilterConfig filter;
  NdtParams ndt;
  double scan_resolution = 0.0;  // <= 0 means ndt.resolution
  EstimatorConfig estimator;
  PoseGraphConfig graph;
  LoopClosureConfig loop;
  KeyframeConfig keyframe;
  bool use_imu = true;

  NdtParams scan_ndt_params() const {
    NdtParams p = ndt;
    if (scan_resolution > 0.0) p.resolution = scan_resolution;
    return p;
  }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named bundles: indoor, outdoor, mixed, oxford, custom (= indoor values).
SlamConfig make_preset(const std::string& name);

/// Flat `key = value` text with `#` comments and module-namespaced keys.
/// An optional `preset = name` must precede every other key. Unknown keys
/// and malformed values throw ConfigError naming the line.
SlamConfig parse_config(std::istream& is, const std::string& source = "<config>");
SlamConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` dump of every setting, parseable by parse_config.
void write_config(std::ostream& os, const SlamConfig& cfg);

}  // namespace randt
