#pragma once

#include <cmath>

#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/preproc/frame_preproc.hpp"
#include "discsplat/render/backward.hpp"
#include "discsplat/render/forward.hpp"

namespace discsplat {

struct LossWeights {
  double color = 1.0;
  double depth = 1.0;
  double reg = 1000.0;
};

struct LossTerms {
  double color = 0.0;
  double depth = 0.0;
  double reg = 0.0;
  double total = 0.0;
  size_t pixels = 0;
  size_t depth_pixels = 0;
};

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Weighted L1 color and depth terms over rendered pixels (optionally
/// restricted to `active`). Both are normalized by the pixel count; depth
/// skips pixels without a hit or without valid input depth. Fills the
/// cotangents when requested.
inline LossTerms image_loss(const RenderBuffers& r, const RGBDFrame& frame, const LossWeights& wts,
                            const Mask* active = nullptr, ColorImage* d_color = nullptr,
                            DepthImage* d_depth = nullptr) {
  require_same_shape(r.color, frame.color, "image_loss color");
  require_same_shape(r.depth, frame.depth, "image_loss depth");
  LossTerms lt;
  for (size_t i = 0; i < r.rendered.size(); ++i)
    if (r.rendered[i] && (!active || (*active)[i])) ++lt.pixels;
  if (d_color) *d_color = ColorImage(r.width, r.height, Vec3::Zero());
  if (d_depth) *d_depth = DepthImage(r.width, r.height, 0.0);
  if (lt.pixels == 0) return lt;
  const double inv_n = 1.0 / static_cast<double>(lt.pixels);
  const bool compact = r.options.depth_mode == DepthMode::Compact;
  double color_sum = 0.0, depth_sum = 0.0;
  for (size_t i = 0; i < r.rendered.size(); ++i) {
    if (!r.rendered[i] || (active && !(*active)[i])) continue;
    Vec3 diff = r.color[i] - frame.color[i];
    color_sum += diff.cwiseAbs().sum();
    if (d_color)
      (*d_color)[i] = (wts.color * inv_n / 3.0) * Vec3(sign_of(diff.x()), sign_of(diff.y()), sign_of(diff.z()));
    const double d_in = frame.depth[i];
    const bool has_hit = compact ? !r.index[i].is_none() : r.depth[i] != -1.0;
    if (!depth_is_valid(d_in) || !has_hit) continue;
    double dd = r.depth[i] - d_in;
    depth_sum += std::abs(dd);
    ++lt.depth_pixels;
    if (d_depth) (*d_depth)[i] = wts.depth * inv_n * sign_of(dd);
  }
  lt.color = color_sum * inv_n / 3.0;
  lt.depth = depth_sum * inv_n;
  lt.total = wts.color * lt.color + wts.depth * lt.depth;
  return lt;
}

/// Sum over transparent Gaussians of squared drift of (p, q, s) from their
/// creation values (unweighted). Adds weight * gradient into `grads` when given.
inline double transparent_regularizer(const GaussianMap& map, double weight, GaussianGradients* grads,
                                      bool unstable_only) {
  double sum = 0.0;
  map.for_each_live([&](size_t i, const Gaussian& g) {
    if (g.is_opaque()) return;
    Vec3 dp = g.position - g.anchor_position;
    Vec3 ds = g.scale - g.anchor_scale;
    Vec4 dq = Vec4(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()) -
              Vec4(g.anchor_rotation.w(), g.anchor_rotation.x(), g.anchor_rotation.y(), g.anchor_rotation.z());
    sum += dp.squaredNorm() + ds.squaredNorm() + dq.squaredNorm();
    if (grads && !(unstable_only && g.is_stable())) {
      grads->position[i] += 2.0 * weight * dp;
      grads->scale[i] += 2.0 * weight * ds;
      grads->rotation[i] += 2.0 * weight * dq;
    }
  });
  return sum;
}

}  // namespace discsplat
