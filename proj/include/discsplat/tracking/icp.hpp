#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/errors.hpp"
#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/core/parallel.hpp"
#include "discsplat/preproc/frame_preproc.hpp"
#include "discsplat/render/forward.hpp"

namespace discsplat {

struct IcpConfig {
  int levels = 3;
  /// Gauss-Newton iterations per level, coarsest first.
  std::vector<int> iterations{10, 5, 4};
  double distance_gate = 0.1;
  double angle_gate_deg = 30.0;
  double convergence_eps = 1e-6;
  size_t min_inliers = 100;
  int max_halvings = 5;
  /// Added to the normal-equation diagonal, relative to its mean. Keeps
  /// directions the visible geometry does not constrain from taking
  /// arbitrary steps.
  double damping = 1e-6;

  void validate() const {
    if (levels < 1 || static_cast<int>(iterations.size()) != levels)
      throw ConfigError("icp: iterations must list one count per level");
    if (!(distance_gate > 0.0) || !(angle_gate_deg > 0.0 && angle_gate_deg < 90.0))
      throw ConfigError("icp: gates must be positive");
    if (!(damping >= 0.0)) throw ConfigError("icp: damping must be non-negative");
  }
};

/// Model surface seen from one camera: world-frame vertices and normals.
struct ModelLevel {
  CameraIntrinsics intrinsics;
  DepthImage depth;
  Image<Vec3> vertices;
  Image<Vec3> normals;
  Mask valid;
};

struct ModelView {
  Pose pose;
  std::vector<ModelLevel> levels;

  size_t valid_count() const { return levels.empty() ? 0 : count(levels[0].valid); }
};

/// Builds the model pyramid from a rendered depth (camera `pose`) and
/// world-frame normal map. Coarser levels keep the pixel whose depth is
/// closest to its block mean, together with that pixel's normal.
inline ModelView model_view_from_depth(const DepthImage& depth, const Image<Vec3>& normals_world, const Pose& pose,
                                       const CameraIntrinsics& k, int levels) {
  ModelView mv;
  mv.pose = pose;
  DepthImage d = depth;
  Image<Vec3> n = normals_world;
  for (int l = 0; l < levels; ++l) {
    ModelLevel ml;
    ml.intrinsics = k.level(l);
    if (l > 0) {
      Image<Vec2> picked;
      DepthImage dd = downsample_depth(d, &picked);
      Image<Vec3> nn(dd.width, dd.height, Vec3::Zero());
      for (int y = 0; y < dd.height; ++y)
        for (int x = 0; x < dd.width; ++x) {
          const Vec2 p = picked(x, y);
          if (p.x() >= 0) nn(x, y) = n(static_cast<int>(p.x()), static_cast<int>(p.y()));
        }
      d = std::move(dd);
      n = std::move(nn);
    }
    ml.depth = d;
    ml.normals = n;
    ml.vertices = Image<Vec3>(d.width, d.height, Vec3::Zero());
    ml.valid = Mask(d.width, d.height, 0);
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        const double z = d(x, y);
        if (!depth_is_valid(z) || n(x, y).squaredNorm() < 0.5) continue;
        ml.vertices(x, y) = pose.apply(z * ml.intrinsics.ray(x, y));
        ml.valid(x, y) = 1;
      }
    mv.levels.push_back(std::move(ml));
  }
  return mv;
}

/// Renders the map's depth and normals from `pose` and builds the model pyramid.
inline ModelView render_model_views(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& k,
                                    int levels = 3) {
  RenderBuffers b = render_forward(map, pose, k);
  return model_view_from_depth(b.depth, b.normal, pose, k, levels);
}

struct IcpDiagnostics {
  size_t inliers = 0;
  double mean_abs_residual = 0.0;
  double rms_residual = 0.0;
  int iterations = 0;
  int halvings = 0;
  std::vector<size_t> level_inliers;
};

namespace detail {

struct Correspondence {
  Vec3 source;  // current vertex, camera frame
  Vec3 target;  // model vertex, world
  Vec3 normal;  // model normal, world
};

inline std::vector<Correspondence> associate(const PyramidLevel& cur, const ModelLevel& model, const Pose& model_pose,
                                             const Pose& estimate, const IcpConfig& cfg) {
  const CameraIntrinsics& k = model.intrinsics;
  const Pose model_inv = model_pose.inverse();
  const double cos_gate = std::cos(cfg.angle_gate_deg * M_PI / 180.0);
  const int w = cur.maps.width(), h = cur.maps.height();
  std::vector<std::vector<Correspondence>> rows(h);
  parallel_for(static_cast<size_t>(h), [&](size_t y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = y * w + x;
      if (!cur.maps.normal_valid[i]) continue;
      const Vec3 vw = estimate.apply(cur.maps.vertices[i]);
      const Vec3 pm = model_inv.apply(vw);
      if (pm.z() <= 0.0) continue;
      const Vec2 uv = k.project(pm);
      const int ux = static_cast<int>(std::lround(uv.x())), uy = static_cast<int>(std::lround(uv.y()));
      if (!model.valid.in_bounds(ux, uy) || !model.valid(ux, uy)) continue;
      const Vec3& tv = model.vertices(ux, uy);
      const Vec3& tn = model.normals(ux, uy);
      if ((vw - tv).norm() > cfg.distance_gate) continue;
      const Vec3 nw = estimate.rotation * cur.maps.normals[i];
      if (nw.dot(tn) < cos_gate) continue;
      rows[y].push_back({cur.maps.vertices[i], tv, tn});
    }
  });
  std::vector<Correspondence> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline double residual_sum(const std::vector<Correspondence>& cs, const Pose& t) {
  double s = 0.0;
  for (const auto& c : cs) {
    const double r = (t.apply(c.source) - c.target).dot(c.normal);
    s += r * r;
  }
  return s;
}

}  // namespace detail

/// Frame-to-model point-to-plane ICP. `current` is the camera-frame
/// pyramid of the incoming frame; returns the world-from-camera pose.
/// Throws TrackingLost when the finest level has too few inliers.
inline Pose icp_track(const std::vector<PyramidLevel>& current, const ModelView& model, const Pose& init,
                      const IcpConfig& cfg, IcpDiagnostics* diag = nullptr) {
  cfg.validate();
  if (static_cast<int>(current.size()) < cfg.levels || static_cast<int>(model.levels.size()) < cfg.levels)
    throw InvalidInput("icp_track: pyramid has fewer levels than configured");
  IcpDiagnostics d;
  d.level_inliers.assign(cfg.levels, 0);
  Pose t = init;
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const int iters = cfg.iterations[cfg.levels - 1 - l];
    for (int it = 0; it < iters; ++it) {
      auto cs = detail::associate(current[l], model.levels[l], model.pose, t, cfg);
      d.level_inliers[l] = cs.size();
      if (cs.size() < 6) break;
      Mat6 hess = Mat6::Zero();
      Vec6 grad = Vec6::Zero();
      double err = 0.0;
      for (const auto& c : cs) {
        const Vec3 v = t.apply(c.source);
        const double r = (v - c.target).dot(c.normal);
        Vec6 j;
        j << c.normal, v.cross(c.normal);
        hess.noalias() += j * j.transpose();
        grad += j * r;
        err += r * r;
      }
      hess.diagonal().array() += cfg.damping * hess.trace() / 6.0;
      Vec6 xi = hess.ldlt().solve(-grad);
      if (!xi.allFinite()) break;
      ++d.iterations;
      double scale = 1.0;
      Pose cand = compose(se3_exp(xi), t);
      cand.orthonormalize();
      int halvings = 0;
      while (detail::residual_sum(cs, cand) > err && halvings < cfg.max_halvings) {
        scale *= 0.5;
        ++halvings;
        cand = compose(se3_exp(scale * xi), t);
        cand.orthonormalize();
      }
      d.halvings += halvings;
      if (detail::residual_sum(cs, cand) > err) break;
      t = cand;
      if ((scale * xi).norm() < cfg.convergence_eps) break;
    }
  }
  auto fin = detail::associate(current[0], model.levels[0], model.pose, t, cfg);
  d.inliers = fin.size();
  for (const auto& c : fin) {
    const double r = std::abs((t.apply(c.source) - c.target).dot(c.normal));
    d.mean_abs_residual += r;
    d.rms_residual += r * r;
  }
  if (!fin.empty()) {
    d.mean_abs_residual /= static_cast<double>(fin.size());
    d.rms_residual = std::sqrt(d.rms_residual / static_cast<double>(fin.size()));
  }
  if (diag) *diag = d;
  if (d.inliers < cfg.min_inliers)
    throw TrackingLost("icp: " + std::to_string(d.inliers) + " inliers at the finest level");
  return t;
}

}  // namespace discsplat
