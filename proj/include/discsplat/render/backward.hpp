#pragma once

#include <vector>

#include "discsplat/render/forward.hpp"

namespace discsplat {

/// Per-slot parameter gradients, indexed like the map.
struct GaussianGradients {
  int sh_coeffs = 0;
  std::vector<Vec3> position;
  std::vector<Vec3> scale;
  std::vector<Vec4> rotation;  // (w, x, y, z)
  std::vector<double> opacity;
  std::vector<Vec3> sh;  // slot * sh_coeffs + k
  /// Slot received a gradient contribution this pass.
  std::vector<uint8_t> touched;

  GaussianGradients() = default;
  GaussianGradients(size_t slots, int coeffs)
      : sh_coeffs(coeffs),
        position(slots, Vec3::Zero()),
        scale(slots, Vec3::Zero()),
        rotation(slots, Vec4::Zero()),
        opacity(slots, 0.0),
        sh(slots * coeffs, Vec3::Zero()),
        touched(slots, 0) {}

  size_t size() const { return position.size(); }
  Vec3* sh_of(size_t slot) { return sh.data() + slot * sh_coeffs; }
  const Vec3* sh_of(size_t slot) const { return sh.data() + slot * sh_coeffs; }

  bool has_sh_gradient(size_t slot) const {
    const Vec3* s = sh_of(slot);
    for (int k = 0; k < sh_coeffs; ++k)
      if (s[k].x() != 0.0 || s[k].y() != 0.0 || s[k].z() != 0.0) return true;
    return false;
  }

  void zero_slot(size_t slot) {
    position[slot].setZero();
    scale[slot].setZero();
    rotation[slot].setZero();
    opacity[slot] = 0.0;
    for (int k = 0; k < sh_coeffs; ++k) sh_of(slot)[k].setZero();
    touched[slot] = 0;
  }
};

struct BackwardOptions {
  /// Stable Gaussians receive zero gradients.
  bool unstable_only = false;
};

/// Gradients of a scalar loss given its cotangents w.r.t. the rendered color
/// and depth. `buffers` must come from render_forward with the same inputs.
/// The depth hit is held fixed; within a hit the active branch of the
/// intersection/center rule is differentiated.
inline GaussianGradients render_backward(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& k,
                                         const RenderOptions& opt, const RenderBuffers& buf,
                                         const ColorImage& d_color, const DepthImage& d_depth,
                                         const BackwardOptions& bopt = {}) {
  if (!buf.cache || buf.map_revision != map.revision() || buf.width != k.width || buf.height != k.height ||
      !(buf.intrinsics == k) || buf.pose.rotation != pose.rotation ||
      buf.pose.translation != pose.translation || buf.options.depth_mode != opt.depth_mode ||
      buf.options.subset != opt.subset)
    throw StaleSnapshot("render_backward: buffers do not match the map or view");
  require_same_shape(buf.color, d_color, "render_backward color cotangent");
  require_same_shape(buf.depth, d_depth, "render_backward depth cotangent");

  const auto& cache = *buf.cache;
  const auto& proj = cache.projected;
  const auto& tiles = cache.tiles;
  const int w = k.width, h = k.height;
  const bool alpha_depth = opt.depth_mode == DepthMode::AlphaBlend;
  const Mat3& rot = pose.rotation;

  std::vector<ScreenGradient> entry_grad(tiles.entries.size());
  parallel_for(tiles.tile_count(), [&](size_t tile) {
    if (!cache.tile_kept[tile]) return;
    const int tx = static_cast<int>(tile % tiles.tiles_x), ty = static_cast<int>(tile / tiles.tiles_x);
    const uint32_t begin = tiles.offsets[tile];
    const int x0 = tx * tiles.tile_size, y0 = ty * tiles.tile_size;
    const int x1 = std::min(w, x0 + tiles.tile_size), y1 = std::min(h, y0 + tiles.tile_size);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const size_t pix = static_cast<size_t>(y) * w + x;
        if (!buf.rendered[pix]) continue;
        const Vec3 dc = d_color[pix];
        const double dd = d_depth[pix];

        // Compact depth: gradient into the single hit Gaussian.
        if (!alpha_depth && dd != 0.0 && cache.hit[pix] >= 0) {
          const auto& pg = proj[static_cast<size_t>(cache.hit[pix])];
          // Locate the hit's entry in this tile's list.
          uint32_t e = begin;
          while (tiles.entries[e] != static_cast<uint32_t>(cache.hit[pix])) ++e;
          ScreenGradient& sg = entry_grad[e];
          if (cache.hit_intersects[pix]) {
            const Vec3 ray = rot * k.ray(x, y);
            const Vec3& n = pg.n_world;
            const double denom = ray.dot(n);
            const Vec3 rel = rot * pg.p_cam;  // p - t in world frame
            const double depth = rel.dot(n) / denom;
            sg.depth_position += dd * n / denom;
            sg.depth_normal += dd * (rel - depth * ray) / denom;
          } else {
            sg.depth_position += dd * rot.col(2);
          }
        }

        const uint32_t last = cache.contrib_end[pix];
        if (last == 0) continue;
        if (dc.isZero(0.0) && !(alpha_depth && dd != 0.0)) continue;
        double t = cache.final_transmission[pix];
        Vec3 accum = Vec3::Zero(), last_color = Vec3::Zero();
        double accum_d = 0.0, last_d = 0.0, last_f = 0.0;
        for (uint32_t j = last; j-- > 0;) {
          const uint32_t e = begin + j;
          const auto& p = proj[tiles.entries[e]];
          const double dx = x - p.mean2d.x(), dy = y - p.mean2d.y();
          const double q = p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy;
          if (q > contribution_cutoff(p.opacity)) continue;
          const double gauss = std::exp(-0.5 * q);
          const double f = std::min(kMaxContribution, p.opacity * gauss);
          if (f < kMinContribution) continue;
          t /= (1.0 - f);
          const double wgt = f * t;
          ScreenGradient& sg = entry_grad[e];
          sg.color += wgt * dc;
          accum = last_f * last_color + (1.0 - last_f) * accum;
          last_color = p.color_eval;
          double d_f = t * (p.color_eval - accum).dot(dc);
          if (alpha_depth) {
            sg.view_depth += wgt * dd;
            accum_d = last_f * last_d + (1.0 - last_f) * accum_d;
            last_d = p.view_depth;
            d_f += t * (p.view_depth - accum_d) * dd;
          }
          last_f = f;
          if (p.opacity * gauss > kMaxContribution) continue;
          sg.opacity += d_f * gauss;
          const double d_q = -0.5 * f * d_f;
          sg.conic_xx += d_q * dx * dx;
          sg.conic_xy += d_q * 2.0 * dx * dy;
          sg.conic_yy += d_q * dy * dy;
          sg.mean.x() += d_q * -2.0 * (p.conic[0] * dx + p.conic[1] * dy);
          sg.mean.y() += d_q * -2.0 * (p.conic[1] * dx + p.conic[2] * dy);
        }
      }
    }
  });

  // Deterministic reduction: tiles in order.
  std::vector<ScreenGradient> per_proj(proj.size());
  std::vector<uint8_t> proj_touched(proj.size(), 0);
  for (size_t tile = 0; tile < tiles.tile_count(); ++tile) {
    if (!cache.tile_kept[tile]) continue;
    for (uint32_t e = tiles.offsets[tile]; e < tiles.offsets[tile + 1]; ++e) {
      per_proj[tiles.entries[e]] += entry_grad[e];
      proj_touched[tiles.entries[e]] = 1;
    }
  }

  GaussianGradients out(map.slot_count(), map.sh_coeffs());
  parallel_for(proj.size(), [&](size_t i) {
    if (!proj_touched[i]) return;
    const auto& pg = proj[i];
    const Gaussian& g = map[pg.source_index];
    if (bopt.unstable_only && g.is_stable()) return;
    Vec3* d_sh = out.sh_of(pg.source_index);
    ParameterGradient pgrad = backprop_projection(g, pg, per_proj[i], pose, k, cache.sh_degree, d_sh);
    out.position[pg.source_index] = pgrad.position;
    out.scale[pg.source_index] = pgrad.scale;
    out.rotation[pg.source_index] = pgrad.rotation;
    out.opacity[pg.source_index] = pgrad.opacity;
    out.touched[pg.source_index] = 1;
  });
  return out;
}

}  // namespace discsplat
