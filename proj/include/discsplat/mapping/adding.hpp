#pragma once

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/mapping/config.hpp"
#include "discsplat/preproc/frame_preproc.hpp"
#include "discsplat/render/forward.hpp"

namespace discsplat {

inline constexpr double kMinInitScale = 1e-4;
inline constexpr double kDiscThicknessRatio = 0.1;

/// Uniform-grid index over Gaussian centers for k-nearest queries.
class CenterGrid {
 public:
  explicit CenterGrid(const GaussianMap& map) : map_(map) {
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    map.for_each_live([&](size_t, const Gaussian& g) {
      lo = lo.cwiseMin(g.position);
      hi = hi.cwiseMax(g.position);
    });
    const size_t n = map.live_count();
    if (n == 0) return;
    const Vec3 ext = (hi - lo).cwiseMax(1e-3);
    cell_ = std::max(1e-3, std::cbrt(ext.prod() / static_cast<double>(n)) * 1.5);
    map.for_each_live([&](size_t i, const Gaussian& g) { cells_[key(cell_of(g.position))].push_back(i); });
    max_ring_ = static_cast<int>(std::ceil(ext.maxCoeff() / cell_)) + 1;
  }

  /// Up to k live Gaussians nearest to p, nearest first (ties by index).
  std::vector<std::pair<double, size_t>> nearest(const Vec3& p, int k) const {
    std::vector<std::pair<double, size_t>> found;
    if (cells_.empty() || k <= 0) return found;
    const Eigen::Vector3i c = cell_of(p);
    for (int r = 0; r <= max_ring_ + 1; ++r) {
      for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy)
          for (int dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
            if (it == cells_.end()) continue;
            for (size_t i : it->second) found.emplace_back((map_[i].position - p).norm(), i);
          }
      if (static_cast<int>(found.size()) >= k) {
        std::partial_sort(found.begin(), found.begin() + k, found.end());
        // Anything outside the searched cube is farther than r * cell.
        if (found[k - 1].first <= r * cell_) {
          found.resize(k);
          return found;
        }
      }
    }
    std::sort(found.begin(), found.end());
    if (static_cast<int>(found.size()) > k) found.resize(k);
    return found;
  }

 private:
  Eigen::Vector3i cell_of(const Vec3& p) const {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
                           static_cast<int>(std::floor(p.z() / cell_)));
  }
  static int64_t key(const Eigen::Vector3i& c) {
    return (static_cast<int64_t>(c.x()) * 73856093) ^ (static_cast<int64_t>(c.y()) * 19349663) ^
           (static_cast<int64_t>(c.z()) * 83492791);
  }

  const GaussianMap& map_;
  double cell_ = 1.0;
  int max_ring_ = 0;
  std::unordered_map<int64_t, std::vector<size_t>> cells_;
};

/// Disc scale (s, s, 0.1 s) from the three nearest Gaussians: s is the square
/// root of the mean of (distance - half the sum of the two largest axis
/// lengths), bounded below by 1e-4 m. Returns nullopt when the map holds
/// fewer than `k` Gaussians.
inline std::optional<Vec3> init_scale(const Vec3& position, const GaussianMap& map, const CenterGrid& grid,
                                      int k = 3) {
  if (static_cast<int>(map.live_count()) < k) return std::nullopt;
  auto nn = grid.nearest(position, k);
  if (static_cast<int>(nn.size()) < k) return std::nullopt;
  double sum = 0.0;
  for (const auto& [dist, i] : nn) {
    Vec3 s = map[i].scale;
    std::sort(s.data(), s.data() + 3);
    sum += dist - 0.5 * (s[2] + s[1]);
  }
  const double mean = sum / k;
  const double s1 = mean > 0.0 ? std::max(kMinInitScale, std::sqrt(mean)) : kMinInitScale;
  return Vec3(s1, s1, kDiscThicknessRatio * s1);
}

inline std::optional<Vec3> init_scale(const Vec3& position, const GaussianMap& map, int k = 3) {
  CenterGrid grid(map);
  return init_scale(position, map, grid, k);
}

/// Scale used when too few neighbors exist: `footprint_px` pixels at `depth`.
inline Vec3 fallback_scale(double depth, const CameraIntrinsics& k, double footprint_px = 2.0) {
  const double s1 = std::max(kMinInitScale, footprint_px * depth / k.fx);
  return {s1, s1, kDiscThicknessRatio * s1};
}

struct AddInputs {
  /// Current frame in world coordinates.
  const VertexNormalMaps* world_maps = nullptr;
  const RGBDFrame* frame = nullptr;
  /// Render of the map at the current pose (for the index map).
  const RenderBuffers* rendered = nullptr;
  const CameraIntrinsics* intrinsics = nullptr;
  int frame_index = 0;
};

struct AddCounts {
  size_t opaque = 0;
  size_t transparent = 0;
  size_t skipped = 0;
};

/// Spawns opaque Gaussians at geometry samples and transparent ones at color
/// samples whose hit Gaussian is stable. Neighbor queries see the map as it
/// was before this call.
inline AddCounts add_gaussians(GaussianMap& map, const std::vector<size_t>& samples_s,
                               const std::vector<size_t>& samples_c, const AddInputs& in,
                               const MappingConfig& cfg) {
  const VertexNormalMaps& vm = *in.world_maps;
  const RGBDFrame& frame = *in.frame;
  const CameraIntrinsics& k = *in.intrinsics;
  AddCounts counts;
  CenterGrid grid(map);
  const GaussianMap& before = map;
  std::vector<Gaussian> pending;

  auto make = [&](size_t pix, GaussianKind kind) {
    if (!vm.valid[pix] || !vm.normal_valid[pix]) {
      ++counts.skipped;
      return;
    }
    const double depth = frame.depth[pix];
    Gaussian g;
    g.position = vm.vertices[pix];
    g.rotation = quaternion_aligning_z(vm.normals[pix]);
    std::optional<Vec3> s = init_scale(g.position, before, grid, cfg.knn);
    Vec3 scale = s ? *s : fallback_scale(depth, k, cfg.fallback_footprint_px);
    if (cfg.max_init_footprint_px > 0.0) {
      const double cap = cfg.max_init_footprint_px * depth / k.fx;
      if (scale.x() > cap) scale *= cap / scale.x();
    }
    g.kind = kind;
    g.opacity = opacity_for(kind);
    if (kind == GaussianKind::Transparent && scale.maxCoeff() > kTransparentMaxScale)
      scale *= kTransparentMaxScale / scale.maxCoeff();
    g.scale = scale.cwiseMax(kMinInitScale * kDiscThicknessRatio);
    g.sh[0] = sh::dc_from_color(frame.color[pix]);
    g.created_at = in.frame_index;
    g.state = GaussianState::Unstable;
    g.set_anchor();
    pending.push_back(g);
    ++(kind == GaussianKind::Opaque ? counts.opaque : counts.transparent);
  };

  for (size_t pix : samples_s) make(pix, GaussianKind::Opaque);
  for (size_t pix : samples_c) {
    const GaussianId id = in.rendered->index[pix];
    if (id.is_none() || !before.is_live(id)) {
      make(pix, GaussianKind::Opaque);
    } else if (before.at(id).is_stable()) {
      make(pix, GaussianKind::Transparent);
    } else {
      ++counts.skipped;
    }
  }
  for (const Gaussian& g : pending) map.add(g);
  return counts;
}

}  // namespace discsplat
