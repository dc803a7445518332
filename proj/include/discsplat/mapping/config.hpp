#pragma once

#include <cstdint>
#include <string>

#include "discsplat/core/errors.hpp"

namespace discsplat {

struct LearningRates {
  double position = 0.001;
  double sh0 = 0.0005;
  double opacity = 0.0;
  /// Applied to log-scale.
  double scale = 0.004;
  double rotation = 0.001;
  /// Rate of higher-order SH coefficients relative to sh0.
  double sh_rest_factor = 0.05;
};

/// Thresholds, window sizes, loss weights and learning rates of the mapper.
/// Field names double as config-file keys (see io/config.hpp).
struct MappingConfig {
  double delta_T = 0.5;
  double delta_d = 0.1;
  double delta_c = 0.1;
  double sample_ratio = 0.05;
  int window_size = 6;
  int iterations = 50;
  uint32_t delta_eta = 100;
  uint32_t delta_e = 3;
  uint32_t delta_t = 30;
  double w_c = 1.0;
  double w_d = 1.0;
  double w_reg = 1000.0;
  LearningRates lr;
  int sh_degree = 2;

  int knn = 3;
  /// Upper bound on an opaque Gaussian's creation scale, in pixel footprints
  /// (depth / fx) at the sampled pixel. 0 disables the bound.
  double max_init_footprint_px = 3.0;
  /// Scale used when the map has fewer than `knn` Gaussians: this many pixel footprints.
  double fallback_footprint_px = 2.0;

  bool unstable_only = true;
  bool tile_discard = true;
  double tile_keep_fraction = 0.5;

  /// Global optimization over keyframes.
  double global_pixel_fraction = 0.4;
  double global_lr_factor = 0.1;
  int global_random_keyframes = 3;
  int refinement_iterations_per_keyframe = 10;

  /// Synthetic, small scenes (Replica-like).
  static MappingConfig synthetic() { return {}; }

  /// Real handheld sequences (TUM-like).
  static MappingConfig tum() {
    MappingConfig c;
    c.window_size = 4;
    c.delta_eta = 200;
    c.lr.sh0 = 0.001;
    c.lr.scale = 0.002;
    return c;
  }

  /// Large real scans.
  static MappingConfig large_scale() {
    MappingConfig c = tum();
    c.window_size = 8;
    c.delta_eta = 400;
    return c;
  }

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid mapping config: ") + what);
    };
    req(delta_T > 0.0, "delta_T must be positive");
    req(delta_d > 0.0, "delta_d must be positive");
    req(delta_c > 0.0, "delta_c must be positive");
    req(sample_ratio > 0.0 && sample_ratio <= 1.0, "sample_ratio must be in (0, 1]");
    req(window_size >= 1, "window_size must be >= 1");
    req(iterations >= 0, "iterations must be >= 0");
    req(delta_eta > 0, "delta_eta must be positive");
    req(delta_t > 0, "delta_t must be positive");
    req(w_c >= 0.0 && w_d >= 0.0 && w_reg >= 0.0, "loss weights must be non-negative");
    req(sh_degree >= 0 && sh_degree <= 3, "sh_degree must be in [0, 3]");
    req(knn >= 1, "knn must be >= 1");
    req(tile_keep_fraction >= 0.0 && tile_keep_fraction <= 1.0, "tile_keep_fraction must be in [0, 1]");
    req(global_pixel_fraction > 0.0 && global_pixel_fraction <= 1.0, "global_pixel_fraction must be in (0, 1]");
  }
};

}  // namespace discsplat
