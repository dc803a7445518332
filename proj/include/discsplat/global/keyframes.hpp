#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "discsplat/mapping/optimizer.hpp"

namespace discsplat {

struct Keyframe {
  int frame_index = 0;
  Pose pose;
  std::shared_ptr<const RGBDFrame> frame;
};

class KeyframeStore {
 public:
  size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const Keyframe& operator[](size_t i) const { return frames_[i]; }
  const Keyframe& last() const {
    if (frames_.empty()) throw InvalidInput("keyframe store is empty");
    return frames_.back();
  }

  void add(Keyframe kf) {
    if (!frames_.empty() && kf.frame_index <= frames_.back().frame_index)
      throw InvalidInput("keyframe indices must increase");
    frames_.push_back(std::move(kf));
  }

 private:
  std::vector<Keyframe> frames_;
};

struct KeyframePolicy {
  double angle_deg = 30.0;
  double move = 0.3;
};

/// True when `pose` moved far enough from the last keyframe (always for an
/// empty store).
inline bool is_keyframe(const Pose& pose, const KeyframeStore& store, const KeyframePolicy& p = {}) {
  if (store.empty()) return true;
  const Pose rel = compose(store.last().pose.inverse(), pose);
  return rotation_angle(rel.rotation) * 180.0 / M_PI > p.angle_deg || rel.translation.norm() > p.move;
}

inline bool maybe_add_keyframe(const Pose& pose, KeyframeStore& store, int frame_index,
                               std::shared_ptr<const RGBDFrame> frame, const KeyframePolicy& p = {}) {
  if (!is_keyframe(pose, store, p)) return false;
  store.add({frame_index, pose, std::move(frame)});
  return true;
}

/// The `fraction` of pixels with the largest mean absolute RGB error;
/// ties keep the lower pixel index.
inline Mask top_error_mask(const ColorImage& rendered, const ColorImage& target, double fraction) {
  require_same_shape(rendered, target, "top_error_mask");
  const size_t n = rendered.size();
  std::vector<double> err(n);
  for (size_t i = 0; i < n; ++i) err[i] = (rendered[i] - target[i]).cwiseAbs().sum() / 3.0;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return err[a] > err[b]; });
  const auto keep = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  Mask m(rendered.width, rendered.height, 0);
  for (size_t i = 0; i < keep && i < n; ++i) m[order[i]] = 1;
  return m;
}

struct GlobalStats {
  int passes = 0;
  std::vector<int> keyframes_used;
  std::vector<double> losses;
};

namespace detail {

inline PassSettings global_pass_settings(const MappingConfig& cfg, const RenderOptions& render) {
  PassSettings ps;
  ps.rates = StepRates::from(cfg.lr, cfg.global_lr_factor);
  ps.rates.position = 0.0;
  ps.unstable_only = false;
  ps.increment_confidence = false;
  ps.tile_keep_fraction = 0.0;
  ps.weights = {cfg.w_c, cfg.w_d, cfg.w_reg};
  ps.render = render;
  return ps;
}

inline double global_pass(GaussianMap& map, AdamOptimizer& adam, const Keyframe& kf, const CameraIntrinsics& k,
                          const MappingConfig& cfg, PassSettings& ps) {
  RenderOptions ro = ps.render;
  RenderBuffers full = render_forward(map, kf.pose, k, ro);
  Mask mask = top_error_mask(full.color, kf.frame->color, cfg.global_pixel_fraction);
  ps.active = &mask;
  const double loss = optimization_pass(map, adam, *kf.frame, kf.pose, k, ps);
  ps.active = nullptr;
  return loss;
}

}  // namespace detail

/// One low-intensity pass over all Gaussians on the latest keyframe and up to
/// `global_random_keyframes` earlier ones. Positions stay fixed.
inline GlobalStats global_optimize_step(GaussianMap& map, const KeyframeStore& store, const CameraIntrinsics& k,
                                        const MappingConfig& cfg, Rng& rng, const RenderOptions& render = {}) {
  GlobalStats st;
  if (store.empty() || map.empty()) return st;
  std::vector<size_t> chosen{store.size() - 1};
  std::vector<size_t> earlier(store.size() - 1);
  std::iota(earlier.begin(), earlier.end(), size_t{0});
  std::sample(earlier.begin(), earlier.end(), std::back_inserter(chosen),
              static_cast<size_t>(std::max(0, cfg.global_random_keyframes)), rng);
  AdamOptimizer adam(map.slot_count(), map.sh_coeffs());
  PassSettings ps = detail::global_pass_settings(cfg, render);
  for (size_t idx : chosen) {
    st.losses.push_back(detail::global_pass(map, adam, store[idx], k, cfg, ps));
    st.keyframes_used.push_back(store[idx].frame_index);
    ++st.passes;
  }
  return st;
}

/// Refinement after the scan: iterations_per_keyframe * |store| passes, each
/// on a uniformly drawn keyframe.
inline GlobalStats final_refinement(GaussianMap& map, const KeyframeStore& store, const CameraIntrinsics& k,
                                    const MappingConfig& cfg, Rng& rng, const RenderOptions& render = {}) {
  GlobalStats st;
  if (store.empty() || map.empty()) return st;
  AdamOptimizer adam(map.slot_count(), map.sh_coeffs());
  PassSettings ps = detail::global_pass_settings(cfg, render);
  std::uniform_int_distribution<size_t> pick(0, store.size() - 1);
  const size_t total = static_cast<size_t>(cfg.refinement_iterations_per_keyframe) * store.size();
  for (size_t it = 0; it < total; ++it) {
    const size_t idx = pick(rng);
    st.losses.push_back(detail::global_pass(map, adam, store[idx], k, cfg, ps));
    st.keyframes_used.push_back(store[idx].frame_index);
    ++st.passes;
  }
  return st;
}

}  // namespace discsplat
