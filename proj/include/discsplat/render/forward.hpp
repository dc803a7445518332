#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/core/parallel.hpp"
#include "discsplat/render/projection.hpp"
#include "discsplat/render/tiles.hpp"

namespace discsplat {

/// Contributions below this are skipped.
inline constexpr double kMinContribution = 1.0 / 255.0;
inline constexpr double kMaxContribution = 0.99;
/// Blending stops once accumulated transmission would drop below this.
inline constexpr double kMinTransmission = 1e-4;

/// Quadratic form beyond which opacity * exp(-q/2) is surely below
/// kMinContribution. Skipping there avoids the slow underflow path of exp.
inline double contribution_cutoff(double opacity) {
  return 2.0 * std::log(opacity / kMinContribution) + 1e-6;
}

enum class RenderSubset { All, UnstableOnly };

/// How D̂ is produced: first opaque disc intersection, or alpha-blended
/// center depths (the conventional splatting baseline).
enum class DepthMode { Compact, AlphaBlend };

struct RenderOptions {
  double alpha_hit_threshold = std::exp(-0.5);
  double normal_angle_limit_deg = 60.0;
  /// Pixels to render; nullptr renders everything. Must outlive the call.
  const Mask* active_pixels = nullptr;
  /// Used only together with active_pixels.
  double tile_keep_fraction = 0.5;
  int tile_size = kDefaultTileSize;
  /// Caps the SH degree used for color; -1 uses the map's degree.
  int sh_degree_clamp = -1;
  RenderSubset subset = RenderSubset::All;
  DepthMode depth_mode = DepthMode::Compact;
};

namespace detail {

/// Everything the backward pass needs to replay the forward traversal.
struct RasterCache {
  std::vector<ProjectedGaussian> projected;
  TileLists tiles;
  std::vector<uint8_t> tile_kept;
  /// Per pixel: one past the last list position blended into color.
  std::vector<uint32_t> contrib_end;
  std::vector<double> final_transmission;
  /// Per pixel: projection index of the depth hit, or -1.
  std::vector<int32_t> hit;
  /// Per pixel: hit depth came from the ray/disc intersection (vs. center).
  std::vector<uint8_t> hit_intersects;
  int sh_degree = 0;
};

struct Primitive {
  double mx, my, a, b, c, opacity;
  double r, g, bl, z;
  double qcut;
  bool opaque;
};

}  // namespace detail

struct RenderBuffers {
  int width = 0;
  int height = 0;
  ColorImage color;
  Image<double> transmission;
  DepthImage depth;
  Image<Vec3> normal;
  Image<GaussianId> index;
  /// Pixels actually rendered; the rest hold sentinel values.
  Mask rendered;

  uint64_t map_revision = 0;
  Pose pose;
  CameraIntrinsics intrinsics;
  RenderOptions options;
  std::shared_ptr<const detail::RasterCache> cache;
};

inline int effective_sh_degree(const GaussianMap& map, const RenderOptions& opt) {
  return opt.sh_degree_clamp < 0 ? map.sh_degree() : std::min(opt.sh_degree_clamp, map.sh_degree());
}

/// Projects every live Gaussian of the requested subset.
inline std::vector<ProjectedGaussian> project_all(const GaussianMap& map, const Pose& pose,
                                                  const CameraIntrinsics& k, const RenderOptions& opt) {
  const int degree = effective_sh_degree(map, opt);
  std::vector<std::optional<ProjectedGaussian>> slots(map.slot_count());
  parallel_for(map.slot_count(), [&](size_t i) {
    if (!map.is_live(i)) return;
    const Gaussian& g = map[i];
    if (opt.subset == RenderSubset::UnstableOnly && g.is_stable()) return;
    slots[i] = project_gaussian(g, pose, k, degree, static_cast<uint32_t>(i));
  });
  std::vector<ProjectedGaussian> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

/// Depth of the ray through pixel (u, v) against a projected disc. Sets
/// `intersects` to false when the ray/normal angle is at or beyond the limit
/// and the center depth is used instead.
inline double disc_depth(const ProjectedGaussian& pg, const CameraIntrinsics& k, double u, double v,
                         double cos_limit, bool* intersects) {
  const Vec3 r = k.ray(u, v);
  const double denom = r.dot(pg.n_cam);
  const double cos_angle = std::abs(denom) / (r.norm() * pg.n_cam.norm());
  if (cos_angle > cos_limit) {
    *intersects = true;
    return pg.p_cam.dot(pg.n_cam) / denom;
  }
  *intersects = false;
  return pg.p_cam.z();
}

inline RenderBuffers render_forward(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& k,
                                    const RenderOptions& opt = {}) {
  const int w = k.width, h = k.height;
  if (opt.active_pixels && (opt.active_pixels->width != w || opt.active_pixels->height != h))
    throw InvalidInput("render_forward: active pixel mask resolution mismatch");
  if (!(opt.alpha_hit_threshold > 0.0 && opt.alpha_hit_threshold < 1.0))
    throw InvalidParameter("render_forward: alpha hit threshold must be in (0, 1)");
  if (!(opt.normal_angle_limit_deg > 0.0 && opt.normal_angle_limit_deg < 90.0))
    throw InvalidParameter("render_forward: normal angle limit must be in (0, 90) degrees");

  RenderBuffers buf;
  buf.width = w;
  buf.height = h;
  buf.color = ColorImage(w, h, Vec3::Zero());
  buf.transmission = Image<double>(w, h, 1.0);
  buf.depth = DepthImage(w, h, -1.0);
  buf.normal = Image<Vec3>(w, h, Vec3::Zero());
  buf.index = Image<GaussianId>(w, h, GaussianId::none());
  buf.rendered = Mask(w, h, 0);
  buf.map_revision = map.revision();
  buf.pose = pose;
  buf.intrinsics = k;
  buf.options = opt;
  buf.options.active_pixels = nullptr;

  auto cache = std::make_shared<detail::RasterCache>();
  cache->sh_degree = effective_sh_degree(map, opt);
  cache->projected = project_all(map, pose, k, opt);
  cache->tiles = bin_and_sort(cache->projected, w, h, opt.tile_size);
  const TileLists& tiles = cache->tiles;
  if (opt.active_pixels)
    cache->tile_kept = active_tiles(*opt.active_pixels, opt.tile_size, opt.tile_keep_fraction);
  else
    cache->tile_kept.assign(tiles.tile_count(), 1);
  const size_t npix = static_cast<size_t>(w) * h;
  cache->contrib_end.assign(npix, 0);
  cache->final_transmission.assign(npix, 1.0);
  cache->hit.assign(npix, -1);
  cache->hit_intersects.assign(npix, 0);

  const double cos_limit = std::cos(opt.normal_angle_limit_deg * M_PI / 180.0);
  const bool alpha_depth = opt.depth_mode == DepthMode::AlphaBlend;
  const auto& proj = cache->projected;

  parallel_for(tiles.tile_count(), [&](size_t tile) {
    if (!cache->tile_kept[tile]) return;
    const int tx = static_cast<int>(tile % tiles.tiles_x), ty = static_cast<int>(tile / tiles.tiles_x);
    const uint32_t begin = tiles.offsets[tile], end = tiles.offsets[tile + 1];
    std::vector<detail::Primitive> prims(end - begin);
    for (uint32_t e = begin; e < end; ++e) {
      const auto& p = proj[tiles.entries[e]];
      prims[e - begin] = {p.mean2d.x(), p.mean2d.y(), p.conic[0], p.conic[1], p.conic[2], p.opacity,
                          p.color_eval.x(), p.color_eval.y(), p.color_eval.z(), p.view_depth,
                          contribution_cutoff(p.opacity), p.opaque};
    }
    const int x0 = tx * tiles.tile_size, y0 = ty * tiles.tile_size;
    const int x1 = std::min(w, x0 + tiles.tile_size), y1 = std::min(h, y0 + tiles.tile_size);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const size_t pix = static_cast<size_t>(y) * w + x;
        if (opt.active_pixels && !(*opt.active_pixels)[pix]) continue;
        double t = 1.0, cr = 0.0, cg = 0.0, cb = 0.0, dsum = 0.0;
        uint32_t last = 0;
        int32_t hit_pos = -1;
        bool done = false;
        for (uint32_t j = 0; j < prims.size(); ++j) {
          const auto& p = prims[j];
          const double dx = x - p.mx, dy = y - p.my;
          const double q = p.a * dx * dx + 2.0 * p.b * dx * dy + p.c * dy * dy;
          if (q > p.qcut) continue;
          const double f = std::min(kMaxContribution, p.opacity * std::exp(-0.5 * q));
          if (f < kMinContribution) continue;
          if (!done) {
            const double tn = t * (1.0 - f);
            if (tn < kMinTransmission) {
              done = true;
            } else {
              const double wgt = f * t;
              cr += p.r * wgt;
              cg += p.g * wgt;
              cb += p.bl * wgt;
              dsum += p.z * wgt;
              t = tn;
              last = j + 1;
            }
          }
          if (hit_pos < 0 && p.opaque && f > opt.alpha_hit_threshold) hit_pos = static_cast<int32_t>(j);
          if (done && hit_pos >= 0) break;
        }
        buf.rendered[pix] = 1;
        buf.color[pix] = Vec3(cr, cg, cb);
        buf.transmission[pix] = t;
        cache->contrib_end[pix] = last;
        cache->final_transmission[pix] = t;
        if (hit_pos >= 0) {
          const uint32_t pidx = tiles.entries[begin + hit_pos];
          const auto& pg = proj[pidx];
          bool intersects = false;
          double d = disc_depth(pg, k, x, y, cos_limit, &intersects);
          cache->hit[pix] = static_cast<int32_t>(pidx);
          cache->hit_intersects[pix] = intersects;
          buf.index[pix] = map.id_of(pg.source_index);
          Vec3 ray_world = pose.rotation * k.ray(x, y);
          buf.normal[pix] = pg.n_world.dot(ray_world) > 0.0 ? Vec3(-pg.n_world) : pg.n_world;
          if (!alpha_depth) buf.depth[pix] = d;
        }
        if (alpha_depth && t < 1.0) buf.depth[pix] = dsum;
      }
    }
  });
  buf.cache = std::move(cache);
  return buf;
}

}  // namespace discsplat
