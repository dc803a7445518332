#pragma once

#include <cmath>
#include <vector>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/core/parallel.hpp"
#include "discsplat/core/se3.hpp"

namespace discsplat {

/// Depths beyond this are treated as invalid, meters.
inline constexpr double kMaxValidDepth = 10.0;
/// Neighbors farther than this from the center depth invalidate a normal.
inline constexpr double kNormalDepthGuard = 0.1;

inline bool depth_is_valid(double d) { return d > 0.0 && d <= kMaxValidDepth && std::isfinite(d); }

/// Sets out-of-range depths to 0 so that later stages see a single invalid marker.
inline DepthImage sanitize_depth(DepthImage depth) {
  for (double& d : depth.data)
    if (!depth_is_valid(d)) d = 0.0;
  return depth;
}

struct VertexNormalMaps {
  Image<Vec3> vertices;
  Image<Vec3> normals;
  Mask valid;          // vertex valid
  Mask normal_valid;   // normal valid (implies vertex valid)

  int width() const { return vertices.width; }
  int height() const { return vertices.height; }
};

inline VertexNormalMaps backproject(const DepthImage& depth, const CameraIntrinsics& k) {
  if (depth.width != k.width || depth.height != k.height)
    throw InvalidInput("backproject: depth size does not match intrinsics");
  VertexNormalMaps m;
  m.vertices = Image<Vec3>(depth.width, depth.height, Vec3::Zero());
  m.normals = Image<Vec3>(depth.width, depth.height, Vec3::Zero());
  m.valid = Mask(depth.width, depth.height, 0);
  m.normal_valid = Mask(depth.width, depth.height, 0);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      double d = depth(x, y);
      if (!depth_is_valid(d)) continue;
      m.vertices(x, y) = d * k.ray(x, y);
      m.valid(x, y) = 1;
    }
  }
  return m;
}

/// Central-difference normals facing the camera (n_z < 0). Borders, pixels
/// with an invalid neighbor and pixels across a depth discontinuity are invalid.
inline VertexNormalMaps compute_normals(VertexNormalMaps maps) {
  const int w = maps.width(), h = maps.height();
  maps.normals = Image<Vec3>(w, h, Vec3::Zero());
  maps.normal_valid = Mask(w, h, 0);
  parallel_for(static_cast<size_t>(h), [&](size_t row) {
    int y = static_cast<int>(row);
    if (y == 0 || y == h - 1) return;
    for (int x = 1; x < w - 1; ++x) {
      if (!maps.valid(x, y)) continue;
      const int nx[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      bool ok = true;
      double zc = maps.vertices(x, y).z();
      for (auto& p : nx) {
        if (!maps.valid(p[0], p[1]) || std::abs(maps.vertices(p[0], p[1]).z() - zc) > kNormalDepthGuard) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      Vec3 dx = maps.vertices(x + 1, y) - maps.vertices(x - 1, y);
      Vec3 dy = maps.vertices(x, y + 1) - maps.vertices(x, y - 1);
      Vec3 n = dx.cross(dy);
      double len = n.norm();
      if (!(len > 0.0)) continue;
      n /= len;
      if (n.z() > 0.0) n = -n;
      maps.normals(x, y) = n;
      maps.normal_valid(x, y) = 1;
    }
  });
  return maps;
}

inline VertexNormalMaps vertex_normal_maps(const DepthImage& depth, const CameraIntrinsics& k) {
  return compute_normals(backproject(depth, k));
}

/// Edge-preserving smoothing over a (2r+1)^2 window. Invalid pixels are left
/// untouched and never contribute.
inline DepthImage bilateral_filter(const DepthImage& depth, double spatial_sigma = 2.0,
                                   double range_sigma = 0.03, int radius = 2) {
  if (!(spatial_sigma > 0.0) || !(range_sigma > 0.0))
    throw InvalidParameter("bilateral_filter: sigmas must be positive");
  DepthImage out = depth;
  const double ks = -0.5 / (spatial_sigma * spatial_sigma);
  const double kr = -0.5 / (range_sigma * range_sigma);
  parallel_for(static_cast<size_t>(depth.height), [&](size_t row) {
    int y = static_cast<int>(row);
    for (int x = 0; x < depth.width; ++x) {
      double dc = depth(x, y);
      if (!depth_is_valid(dc)) continue;
      double sum = 0.0, wsum = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          int xx = x + dx, yy = y + dy;
          if (!depth.in_bounds(xx, yy)) continue;
          double d = depth(xx, yy);
          if (!depth_is_valid(d)) continue;
          double wgt = std::exp(ks * (dx * dx + dy * dy) + kr * (d - dc) * (d - dc));
          sum += wgt * d;
          wsum += wgt;
        }
      }
      out(x, y) = sum / wsum;
    }
  });
  return out;
}

/// Halves resolution; each output takes the valid input in its 2x2 block
/// closest to the block's valid mean. Odd trailing rows/columns are dropped.
inline DepthImage downsample_depth(const DepthImage& depth, Image<Vec2>* picked = nullptr) {
  int w = depth.width / 2, h = depth.height / 2;
  DepthImage out(w, h, 0.0);
  if (picked) *picked = Image<Vec2>(w, h, Vec2(-1, -1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          double d = depth(2 * x + i, 2 * y + j);
          if (depth_is_valid(d)) {
            sum += d;
            ++n;
          }
        }
      if (n == 0) continue;
      double mean = sum / n;
      double best = 0.0, best_err = 1e300;
      Vec2 best_px(-1, -1);
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          double d = depth(2 * x + i, 2 * y + j);
          if (!depth_is_valid(d)) continue;
          double e = std::abs(d - mean);
          if (e < best_err) {
            best_err = e;
            best = d;
            best_px = Vec2(2 * x + i, 2 * y + j);
          }
        }
      out(x, y) = best;
      if (picked) (*picked)(x, y) = best_px;
    }
  }
  return out;
}

struct PyramidLevel {
  CameraIntrinsics intrinsics;
  DepthImage depth;
  VertexNormalMaps maps;
};

/// Level 0 is full resolution; level l has intrinsics scaled by 2^-l.
inline std::vector<PyramidLevel> build_pyramid(const DepthImage& depth, const CameraIntrinsics& k,
                                               int levels = 3) {
  if (levels < 1) throw InvalidParameter("build_pyramid: levels must be >= 1");
  std::vector<PyramidLevel> pyr;
  pyr.reserve(levels);
  DepthImage d = depth;
  for (int l = 0; l < levels; ++l) {
    CameraIntrinsics kl = k.level(l);
    if (l > 0) d = downsample_depth(d);
    if (d.width != kl.width || d.height != kl.height)
      throw InvalidInput("build_pyramid: depth size does not match intrinsics");
    pyr.push_back({kl, d, vertex_normal_maps(d, kl)});
  }
  return pyr;
}

/// Vertices by the full rigid transform, normals by rotation only.
inline VertexNormalMaps transform_maps(const VertexNormalMaps& maps, const Pose& pose) {
  VertexNormalMaps out = maps;
  for (size_t i = 0; i < out.vertices.size(); ++i) {
    if (out.valid[i]) out.vertices[i] = pose.apply(maps.vertices[i]);
    if (out.normal_valid[i]) out.normals[i] = pose.rotation * maps.normals[i];
  }
  return out;
}

}  // namespace discsplat
