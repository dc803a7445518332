#pragma once

#include <cmath>
#include <vector>

#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/mapping/config.hpp"
#include "discsplat/mapping/masks.hpp"
#include "discsplat/render/forward.hpp"

namespace discsplat {

struct StateReport {
  size_t error_increments = 0;
  size_t demoted = 0;
  size_t promoted = 0;
  size_t removed = 0;
};

/// Counts errors of stable Gaussians against `frame` (at most one per
/// Gaussian per call), then applies the transitions: stable with too many
/// errors becomes unstable; unstable with enough updates becomes stable;
/// unstable for too long is removed. A demoted Gaussian restarts its
/// confidence count and age at frame `k`.
inline StateReport manage_states(GaussianMap& map, const RenderBuffers& optimized, const RGBDFrame& frame,
                                 const MappingConfig& cfg, int k) {
  require_same_shape(optimized.color, frame.color, "manage_states");
  StateReport rep;
  std::vector<uint8_t> erred(map.slot_count(), 0);
  for (size_t i = 0; i < optimized.index.size(); ++i) {
    const GaussianId id = optimized.index[i];
    if (id.is_none() || !map.is_live(id)) continue;
    const size_t slot = static_cast<size_t>(id.index);
    if (!map[slot].is_stable() || erred[slot]) continue;
    const bool color_bad = mean_abs_rgb(optimized.color[i], frame.color[i]) > cfg.delta_c;
    const bool depth_bad = depth_is_valid(frame.depth[i]) && std::abs(optimized.depth[i] - frame.depth[i]) > cfg.delta_d;
    if (color_bad || depth_bad) erred[slot] = 1;
  }
  for (size_t i = 0; i < map.slot_count(); ++i) {
    if (!map.is_live(i)) continue;
    if (erred[i]) {
      ++map.mutable_at(i).error_count;
      ++rep.error_increments;
    }
    const Gaussian& g = map[i];
    if (g.is_stable()) {
      if (g.error_count > cfg.delta_e) {
        Gaussian& m = map.mutable_at(i);
        m.state = GaussianState::Unstable;
        m.error_count = 0;
        m.confidence_count = 0;
        m.created_at = k;
        ++rep.demoted;
      }
    } else if (g.confidence_count > cfg.delta_eta) {
      map.mutable_at(i).state = GaussianState::Stable;
      ++rep.promoted;
    } else if (static_cast<int64_t>(k) - g.created_at > static_cast<int64_t>(cfg.delta_t)) {
      map.remove(i);
      ++rep.removed;
    }
  }
  return rep;
}

}  // namespace discsplat
