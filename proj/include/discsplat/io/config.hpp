#pragma once

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/global/keyframes.hpp"
#include "discsplat/mapping/config.hpp"
#include "discsplat/tracking/icp.hpp"

namespace discsplat {

/// Everything a pipeline run depends on.
struct RunConfig {
  MappingConfig mapping;
  IcpConfig icp;
  KeyframePolicy keyframes;
  uint64_t seed = 0;
  /// No producer/consumer overlap between frame loading and mapping.
  bool serial = false;
  /// Frame 0 starts at its dataset pose instead of the identity.
  bool init_from_ground_truth = false;
  /// Skip tracking and use dataset poses for every frame.
  bool use_ground_truth_poses = false;
  bool bilateral_filter = false;
  /// Tracking loss aborts the run instead of reusing the previous pose.
  bool strict_tracking = false;
  bool global_optimization = true;
  bool final_refinement = true;
  bool save_keyframe_renders = false;
  /// 0 processes every frame.
  int max_frames = 0;

  void validate() const {
    mapping.validate();
    icp.validate();
    if (!(keyframes.angle_deg > 0.0) || !(keyframes.move > 0.0)) throw ConfigError("keyframe thresholds must be positive");
    if (max_frames < 0) throw ConfigError("max_frames must be >= 0");
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = b + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Entry {
  Setter set;
  Getter get;
};

inline std::string show(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}
template <typename T>
std::string show(T v) {
  return std::to_string(v);
}
inline std::string show(bool v) { return v ? "true" : "false"; }

template <typename T, typename Get>
Entry num(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_number<T>(k, v); },
          [get](const RunConfig& c) { return show(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Entry flag(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_bool(k, v); },
          [get](const RunConfig& c) { return show(get(const_cast<RunConfig&>(c))); }};
}

inline const std::map<std::string, Entry>& config_table() {
  static const std::map<std::string, Entry> table = {
      {"delta_T", num<double>([](RunConfig& c) -> double& { return c.mapping.delta_T; })},
      {"delta_d", num<double>([](RunConfig& c) -> double& { return c.mapping.delta_d; })},
      {"delta_c", num<double>([](RunConfig& c) -> double& { return c.mapping.delta_c; })},
      {"sample_ratio", num<double>([](RunConfig& c) -> double& { return c.mapping.sample_ratio; })},
      {"window_size", num<int>([](RunConfig& c) -> int& { return c.mapping.window_size; })},
      {"iterations", num<int>([](RunConfig& c) -> int& { return c.mapping.iterations; })},
      {"delta_eta", num<uint32_t>([](RunConfig& c) -> uint32_t& { return c.mapping.delta_eta; })},
      {"delta_e", num<uint32_t>([](RunConfig& c) -> uint32_t& { return c.mapping.delta_e; })},
      {"delta_t", num<uint32_t>([](RunConfig& c) -> uint32_t& { return c.mapping.delta_t; })},
      {"w_c", num<double>([](RunConfig& c) -> double& { return c.mapping.w_c; })},
      {"w_d", num<double>([](RunConfig& c) -> double& { return c.mapping.w_d; })},
      {"w_reg", num<double>([](RunConfig& c) -> double& { return c.mapping.w_reg; })},
      {"lr_position", num<double>([](RunConfig& c) -> double& { return c.mapping.lr.position; })},
      {"lr_sh0", num<double>([](RunConfig& c) -> double& { return c.mapping.lr.sh0; })},
      {"lr_opacity", num<double>([](RunConfig& c) -> double& { return c.mapping.lr.opacity; })},
      {"lr_scale", num<double>([](RunConfig& c) -> double& { return c.mapping.lr.scale; })},
      {"lr_rotation", num<double>([](RunConfig& c) -> double& { return c.mapping.lr.rotation; })},
      {"lr_sh_rest_factor", num<double>([](RunConfig& c) -> double& { return c.mapping.lr.sh_rest_factor; })},
      {"sh_degree", num<int>([](RunConfig& c) -> int& { return c.mapping.sh_degree; })},
      {"knn", num<int>([](RunConfig& c) -> int& { return c.mapping.knn; })},
      {"max_init_footprint_px", num<double>([](RunConfig& c) -> double& { return c.mapping.max_init_footprint_px; })},
      {"fallback_footprint_px", num<double>([](RunConfig& c) -> double& { return c.mapping.fallback_footprint_px; })},
      {"unstable_only", flag([](RunConfig& c) -> bool& { return c.mapping.unstable_only; })},
      {"tile_discard", flag([](RunConfig& c) -> bool& { return c.mapping.tile_discard; })},
      {"tile_keep_fraction", num<double>([](RunConfig& c) -> double& { return c.mapping.tile_keep_fraction; })},
      {"global_pixel_fraction", num<double>([](RunConfig& c) -> double& { return c.mapping.global_pixel_fraction; })},
      {"global_lr_factor", num<double>([](RunConfig& c) -> double& { return c.mapping.global_lr_factor; })},
      {"global_random_keyframes", num<int>([](RunConfig& c) -> int& { return c.mapping.global_random_keyframes; })},
      {"refinement_iterations_per_keyframe",
       num<int>([](RunConfig& c) -> int& { return c.mapping.refinement_iterations_per_keyframe; })},
      {"icp_levels", num<int>([](RunConfig& c) -> int& { return c.icp.levels; })},
      {"icp_iterations",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          std::vector<int> its;
          std::stringstream ss(v);
          std::string part;
          while (std::getline(ss, part, ',')) its.push_back(parse_number<int>(k, part));
          c.icp.iterations = its;
        },
        [](const RunConfig& c) {
          std::string s;
          for (size_t i = 0; i < c.icp.iterations.size(); ++i) s += (i ? "," : "") + std::to_string(c.icp.iterations[i]);
          return s;
        }}},
      {"icp_distance_gate", num<double>([](RunConfig& c) -> double& { return c.icp.distance_gate; })},
      {"icp_angle_gate_deg", num<double>([](RunConfig& c) -> double& { return c.icp.angle_gate_deg; })},
      {"icp_convergence_eps", num<double>([](RunConfig& c) -> double& { return c.icp.convergence_eps; })},
      {"icp_min_inliers", num<size_t>([](RunConfig& c) -> size_t& { return c.icp.min_inliers; })},
      {"icp_max_halvings", num<int>([](RunConfig& c) -> int& { return c.icp.max_halvings; })},
      {"keyframe_angle_deg", num<double>([](RunConfig& c) -> double& { return c.keyframes.angle_deg; })},
      {"keyframe_move", num<double>([](RunConfig& c) -> double& { return c.keyframes.move; })},
      {"seed", num<uint64_t>([](RunConfig& c) -> uint64_t& { return c.seed; })},
      {"serial", flag([](RunConfig& c) -> bool& { return c.serial; })},
      {"init_from_ground_truth", flag([](RunConfig& c) -> bool& { return c.init_from_ground_truth; })},
      {"use_ground_truth_poses", flag([](RunConfig& c) -> bool& { return c.use_ground_truth_poses; })},
      {"bilateral_filter", flag([](RunConfig& c) -> bool& { return c.bilateral_filter; })},
      {"strict_tracking", flag([](RunConfig& c) -> bool& { return c.strict_tracking; })},
      {"global_optimization", flag([](RunConfig& c) -> bool& { return c.global_optimization; })},
      {"final_refinement", flag([](RunConfig& c) -> bool& { return c.final_refinement; })},
      {"save_keyframe_renders", flag([](RunConfig& c) -> bool& { return c.save_keyframe_renders; })},
      {"max_frames", num<int>([](RunConfig& c) -> int& { return c.max_frames; })},
  };
  return table;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::config_table()) keys.push_back(k);
  return keys;
}

/// Every key with its current value, as accepted by apply_config_value.
inline std::map<std::string, std::string> config_values(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [k, e] : detail::config_table()) out[k] = e.get(cfg);
  return out;
}

/// Sets one key. "preset" replaces the mapping parameters with a named preset.
inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "preset") {
    if (value == "synthetic") cfg.mapping = MappingConfig::synthetic();
    else if (value == "tum") cfg.mapping = MappingConfig::tum();
    else if (value == "large_scale") cfg.mapping = MappingConfig::large_scale();
    else throw ConfigError("unknown preset '" + value + "'");
    return;
  }
  const auto& table = detail::config_table();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

/// key = value lines; '#' starts a comment.
inline void apply_config_stream(RunConfig& cfg, std::istream& in, const std::string& name) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      apply_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  apply_config_stream(cfg, in, path);
}

}  // namespace discsplat
