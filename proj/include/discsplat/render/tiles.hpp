#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "discsplat/core/image.hpp"
#include "discsplat/render/projection.hpp"

namespace discsplat {

inline constexpr int kDefaultTileSize = 16;

/// Per-tile front-to-back lists of positions into a projection array.
struct TileLists {
  int tile_size = kDefaultTileSize;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<uint32_t> offsets;  // tiles_x * tiles_y + 1 entries
  std::vector<uint32_t> entries;

  size_t tile_count() const { return static_cast<size_t>(tiles_x) * tiles_y; }
  size_t tile_index(int tx, int ty) const { return static_cast<size_t>(ty) * tiles_x + tx; }
  size_t list_size(size_t tile) const { return offsets[tile + 1] - offsets[tile]; }
  std::vector<uint32_t> list(size_t tile) const {
    return {entries.begin() + offsets[tile], entries.begin() + offsets[tile + 1]};
  }
};

inline int tiles_along(int pixels, int tile_size) { return (pixels + tile_size - 1) / tile_size; }

/// Assigns each projection to every tile its footprint box overlaps and sorts
/// each list by (view_depth, source_index).
inline TileLists bin_and_sort(const std::vector<ProjectedGaussian>& projections, int width, int height,
                              int tile_size = kDefaultTileSize) {
  TileLists t;
  t.tile_size = tile_size;
  t.tiles_x = tiles_along(width, tile_size);
  t.tiles_y = tiles_along(height, tile_size);
  std::vector<uint32_t> counts(t.tile_count() + 1, 0);
  for (const auto& p : projections) {
    for (int ty = p.y_min / tile_size; ty <= p.y_max / tile_size; ++ty)
      for (int tx = p.x_min / tile_size; tx <= p.x_max / tile_size; ++tx) ++counts[t.tile_index(tx, ty)];
  }
  t.offsets.assign(t.tile_count() + 1, 0);
  for (size_t i = 0; i < t.tile_count(); ++i) t.offsets[i + 1] = t.offsets[i] + counts[i];
  t.entries.resize(t.offsets.back());
  std::vector<uint32_t> fill(t.offsets.begin(), t.offsets.end() - 1);
  for (uint32_t i = 0; i < projections.size(); ++i) {
    const auto& p = projections[i];
    for (int ty = p.y_min / tile_size; ty <= p.y_max / tile_size; ++ty)
      for (int tx = p.x_min / tile_size; tx <= p.x_max / tile_size; ++tx)
        t.entries[fill[t.tile_index(tx, ty)]++] = i;
  }
  for (size_t tile = 0; tile < t.tile_count(); ++tile) {
    std::sort(t.entries.begin() + t.offsets[tile], t.entries.begin() + t.offsets[tile + 1],
              [&](uint32_t a, uint32_t b) {
                const auto& pa = projections[a];
                const auto& pb = projections[b];
                if (pa.view_depth != pb.view_depth) return pa.view_depth < pb.view_depth;
                return pa.source_index < pb.source_index;
              });
  }
  return t;
}

/// Tile kept iff its active-pixel fraction is at least `keep_fraction`.
/// Fractions use the tile's in-image pixel count.
inline std::vector<uint8_t> active_tiles(const Mask& mask, int tile_size = kDefaultTileSize,
                                         double keep_fraction = 0.5) {
  const int tx_n = tiles_along(mask.width, tile_size), ty_n = tiles_along(mask.height, tile_size);
  std::vector<uint8_t> keep(static_cast<size_t>(tx_n) * ty_n, 0);
  for (int ty = 0; ty < ty_n; ++ty) {
    for (int tx = 0; tx < tx_n; ++tx) {
      int x0 = tx * tile_size, y0 = ty * tile_size;
      int x1 = std::min(mask.width, x0 + tile_size), y1 = std::min(mask.height, y0 + tile_size);
      size_t active = 0, total = static_cast<size_t>(x1 - x0) * (y1 - y0);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) active += mask(x, y) != 0;
      keep[static_cast<size_t>(ty) * tx_n + tx] =
          active > 0 && static_cast<double>(active) >= keep_fraction * static_cast<double>(total);
    }
  }
  return keep;
}

}  // namespace discsplat
