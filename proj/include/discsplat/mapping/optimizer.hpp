#pragma once

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/mapping/config.hpp"
#include "discsplat/mapping/loss.hpp"
#include "discsplat/render/backward.hpp"
#include "discsplat/render/forward.hpp"

namespace discsplat {

using Rng = std::mt19937_64;

/// Per-group step sizes for one optimization pass.
struct StepRates {
  double position = 0.0;
  double scale = 0.0;
  double rotation = 0.0;
  double sh0 = 0.0;
  double sh_rest = 0.0;

  static StepRates from(const LearningRates& lr, double factor = 1.0) {
    return {lr.position * factor, lr.scale * factor, lr.rotation * factor, lr.sh0 * factor,
            lr.sh0 * lr.sh_rest_factor * factor};
  }
};

/// Adam moments per Gaussian slot. Scale is optimized in log space and
/// rotation as a raw quaternion renormalized after each step.
class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-15;

  AdamOptimizer(size_t slots, int sh_coeffs) : sh_coeffs_(sh_coeffs) { resize(slots); }

  void resize(size_t slots) {
    m_.resize(slots * stride(), 0.0);
    v_.resize(slots * stride(), 0.0);
    active_.resize(slots, 0);
  }

  int step_count() const { return step_; }

  /// Applies one step to every slot with a gradient or nonzero moments.
  /// `eligible(i)` gates which slots may move.
  template <typename Eligible>
  void step(GaussianMap& map, const GaussianGradients& grads, const StepRates& rates, Eligible&& eligible) {
    resize(map.slot_count());
    ++step_;
    const double bc1 = 1.0 - std::pow(kBeta1, step_);
    const double bc2 = 1.0 - std::pow(kBeta2, step_);
    const size_t n = stride();
    std::vector<double> gvec(n), upd(n);
    for (size_t i = 0; i < map.slot_count(); ++i) {
      if (!map.is_live(i) || !eligible(i)) continue;
      if (!grads.touched[i] && !active_[i]) continue;
      const Gaussian& cur = map[i];
      size_t o = 0;
      for (int a = 0; a < 3; ++a) gvec[o++] = grads.position[i][a];
      for (int a = 0; a < 3; ++a) gvec[o++] = grads.scale[i][a] * cur.scale[a];
      for (int a = 0; a < 4; ++a) gvec[o++] = grads.rotation[i][a];
      const Vec3* dsh = grads.sh_of(i);
      for (int c = 0; c < sh_coeffs_; ++c)
        for (int ch = 0; ch < 3; ++ch) gvec[o++] = dsh[c][ch];

      double* m = m_.data() + i * n;
      double* v = v_.data() + i * n;
      for (size_t j = 0; j < n; ++j) {
        m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * gvec[j];
        v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * gvec[j] * gvec[j];
        upd[j] = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + kEpsilon);
      }
      active_[i] = 1;

      Gaussian& g = map.mutable_at(i);
      o = 0;
      for (int a = 0; a < 3; ++a) g.position[a] -= rates.position * upd[o++];
      for (int a = 0; a < 3; ++a) g.scale[a] = std::exp(std::log(g.scale[a]) - rates.scale * upd[o++]);
      Vec4 q(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
      for (int a = 0; a < 4; ++a) q[a] -= rates.rotation * upd[o++];
      g.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
      for (int c = 0; c < sh_coeffs_; ++c) {
        const double lr = c == 0 ? rates.sh0 : rates.sh_rest;
        for (int ch = 0; ch < 3; ++ch) g.sh[c][ch] -= lr * upd[o++];
      }
    }
  }

 private:
  size_t stride() const { return 10 + 3 * static_cast<size_t>(sh_coeffs_); }

  int sh_coeffs_;
  int step_ = 0;
  std::vector<double> m_, v_;
  std::vector<uint8_t> active_;
};

struct WindowFrame {
  const RGBDFrame* frame = nullptr;
  Pose pose;
};

struct OptimizeStats {
  int iterations = 0;
  std::vector<double> losses;
  double seconds = 0.0;
  size_t active_pixels = 0;
  size_t confidence_increments = 0;
};

/// One forward/backward/update pass against one frame. Returns the loss.
/// `active` restricts loss pixels; tile_keep applies to it.
struct PassSettings {
  StepRates rates;
  bool unstable_only = true;
  bool increment_confidence = true;
  const Mask* active = nullptr;
  double tile_keep_fraction = 0.0;
  LossWeights weights;
  RenderOptions render;
};

inline double optimization_pass(GaussianMap& map, AdamOptimizer& adam, const RGBDFrame& frame, const Pose& pose,
                                const CameraIntrinsics& k, const PassSettings& ps, size_t* increments = nullptr) {
  RenderOptions ro = ps.render;
  ro.active_pixels = ps.active;
  ro.tile_keep_fraction = ps.tile_keep_fraction;
  RenderBuffers buf = render_forward(map, pose, k, ro);
  ColorImage d_color;
  DepthImage d_depth;
  LossTerms lt = image_loss(buf, frame, ps.weights, nullptr, &d_color, &d_depth);
  GaussianGradients grads = render_backward(map, pose, k, ro, buf, d_color, d_depth, {ps.unstable_only});
  double reg = transparent_regularizer(map, ps.weights.reg, &grads, ps.unstable_only);
  for (size_t i = 0; i < map.slot_count(); ++i)
    if (map.is_live(i) && !map[i].is_opaque() && !(ps.unstable_only && map[i].is_stable())) grads.touched[i] = 1;

  std::vector<uint8_t> sh_updated(map.slot_count(), 0);
  for (size_t i = 0; i < map.slot_count(); ++i) sh_updated[i] = grads.touched[i] && grads.has_sh_gradient(i);
  auto eligible = [&](size_t i) { return !(ps.unstable_only && map[i].is_stable()); };
  adam.step(map, grads, ps.rates, eligible);
  if (ps.increment_confidence) {
    for (size_t i = 0; i < map.slot_count(); ++i) {
      if (sh_updated[i] && map.is_live(i) && eligible(i)) {
        ++map.mutable_at(i).confidence_count;
        if (increments) ++*increments;
      }
    }
  }
  return lt.total + ps.weights.reg * reg;
}

/// Mask of pixels touched by unstable Gaussians: T̂ rendered from the unstable
/// subset is below one.
inline Mask unstable_pixel_mask(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& k,
                                const RenderOptions& base = {}) {
  RenderOptions ro = base;
  ro.subset = RenderSubset::UnstableOnly;
  ro.active_pixels = nullptr;
  RenderBuffers b = render_forward(map, pose, k, ro);
  Mask m(k.width, k.height, 0);
  for (size_t i = 0; i < m.size(); ++i) m[i] = b.transmission[i] < 1.0;
  return m;
}

/// Windowed optimization: each iteration samples one frame of the window
/// uniformly and updates Gaussians (only unstable ones when configured).
inline OptimizeStats optimize_window(GaussianMap& map, const std::vector<WindowFrame>& window,
                                     const CameraIntrinsics& k, const MappingConfig& cfg, Rng& rng,
                                     const RenderOptions& render = {}) {
  OptimizeStats stats;
  if (window.empty()) throw InvalidInput("optimize_window: empty window");
  if (cfg.unstable_only && map.unstable_count() == 0) return stats;
  if (map.empty()) return stats;
  auto t0 = std::chrono::steady_clock::now();

  std::vector<Mask> masks;
  if (cfg.unstable_only) {
    for (const auto& wf : window) {
      masks.push_back(unstable_pixel_mask(map, wf.pose, k, render));
      stats.active_pixels += count(masks.back());
    }
  }
  AdamOptimizer adam(map.slot_count(), map.sh_coeffs());
  PassSettings ps;
  ps.rates = StepRates::from(cfg.lr);
  ps.unstable_only = cfg.unstable_only;
  ps.weights = {cfg.w_c, cfg.w_d, cfg.w_reg};
  ps.render = render;
  ps.tile_keep_fraction = cfg.tile_discard ? cfg.tile_keep_fraction : 0.0;
  std::uniform_int_distribution<size_t> pick(0, window.size() - 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    size_t f = pick(rng);
    ps.active = cfg.unstable_only ? &masks[f] : nullptr;
    double loss = optimization_pass(map, adam, *window[f].frame, window[f].pose, k, ps,
                                    &stats.confidence_increments);
    stats.losses.push_back(loss);
    ++stats.iterations;
  }
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

/// Weighted blend of a Gaussian before and after a window's optimization.
/// The weight is the share of confidence gained in this window.
inline Gaussian fuse_optimized(const Gaussian& before, const Gaussian& after) {
  const uint32_t eta_prev = before.confidence_count, eta_new = after.confidence_count;
  if (eta_new == 0) throw InvalidParameter("fuse_optimized: Gaussian was never optimized");
  if (eta_new < eta_prev) throw InvalidParameter("fuse_optimized: confidence count decreased");
  const double w = static_cast<double>(eta_new - eta_prev) / static_cast<double>(eta_new);
  Gaussian out = after;
  if (w == 0.0) {
    out = before;
  } else if (w != 1.0) {
    out.position = (1.0 - w) * before.position + w * after.position;
    out.scale = (1.0 - w) * before.scale + w * after.scale;
    for (size_t c = 0; c < out.sh.size(); ++c) out.sh[c] = (1.0 - w) * before.sh[c] + w * after.sh[c];
    Quat qa = after.rotation;
    if (qa.dot(before.rotation) < 0.0) qa.coeffs() *= -1.0;
    out.rotation = Quat((1.0 - w) * before.rotation.coeffs() + w * qa.coeffs()).normalized();
  }
  out.confidence_count = eta_new;
  return out;
}

/// Parameters of every live Gaussian before a window's optimization.
struct WindowSnapshot {
  std::vector<GaussianId> ids;
  std::vector<Gaussian> gaussians;
};

inline WindowSnapshot capture_window(const GaussianMap& map) {
  WindowSnapshot s;
  map.for_each_live([&](size_t i, const Gaussian& g) {
    s.ids.push_back(map.id_of(i));
    s.gaussians.push_back(g);
  });
  return s;
}

/// Applies fuse_optimized to every Gaussian that gained confidence since the
/// snapshot and restores the others exactly.
inline void fuse_window(GaussianMap& map, const WindowSnapshot& snap) {
  for (size_t j = 0; j < snap.ids.size(); ++j) {
    if (!map.is_live(snap.ids[j])) continue;
    const size_t i = static_cast<size_t>(snap.ids[j].index);
    const Gaussian& before = snap.gaussians[j];
    const Gaussian& after = map[i];
    if (after.confidence_count == before.confidence_count) {
      if (after.position != before.position || after.scale != before.scale ||
          after.rotation.coeffs() != before.rotation.coeffs() || after.sh != before.sh)
        map.mutable_at(i) = before;
      continue;
    }
    map.mutable_at(i) = fuse_optimized(before, after);
  }
}

}  // namespace discsplat
