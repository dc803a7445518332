#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "discsplat/core/image.hpp"
#include "discsplat/mapping/config.hpp"
#include "discsplat/preproc/frame_preproc.hpp"
#include "discsplat/render/forward.hpp"

namespace discsplat {

/// Pixels needing new geometry (`geometry`) and, disjointly, pixels whose
/// color is off while the geometry is fine (`color`).
struct AddMasks {
  Mask geometry;
  Mask color;
};

inline double mean_abs_rgb(const Vec3& a, const Vec3& b) { return (a - b).cwiseAbs().sum() / 3.0; }

inline AddMasks compute_add_masks(const RenderBuffers& r, const RGBDFrame& frame, const MappingConfig& cfg) {
  require_same_shape(r.color, frame.color, "compute_add_masks color");
  require_same_shape(r.depth, frame.depth, "compute_add_masks depth");
  AddMasks m{Mask(r.width, r.height, 0), Mask(r.width, r.height, 0)};
  for (size_t i = 0; i < m.geometry.size(); ++i) {
    const double d = frame.depth[i];
    if (!depth_is_valid(d)) continue;
    const bool missing = r.depth[i] == -1.0 || std::abs(r.depth[i] - d) > cfg.delta_d;
    if (r.transmission[i] > cfg.delta_T || missing) {
      m.geometry[i] = 1;
    } else if (mean_abs_rgb(r.color[i], frame.color[i]) > cfg.delta_c) {
      m.color[i] = 1;
    }
  }
  return m;
}

/// ceil(ratio * |mask|) distinct pixel indices drawn uniformly from the mask,
/// in ascending order.
inline std::vector<size_t> sample_mask(const Mask& mask, double ratio, std::mt19937_64& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidParameter("sample_mask: ratio must be in (0, 1]");
  std::vector<size_t> members;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) members.push_back(i);
  const auto n = static_cast<size_t>(std::ceil(ratio * static_cast<double>(members.size()) - 1e-9));
  std::vector<size_t> out;
  out.reserve(n);
  std::sample(members.begin(), members.end(), std::back_inserter(out), n, rng);
  return out;
}

inline std::vector<size_t> sample_mask(const Mask& mask, double ratio, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_mask(mask, ratio, rng);
}

}  // namespace discsplat
