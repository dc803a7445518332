#pragma once

#include <cmath>
#include <string>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/se3.hpp"

namespace discsplat {

/// Pinhole intrinsics. Integer pixel coordinates address pixel centers.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  /// Depth units per meter in stored depth images.
  double depth_scale = 1000.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidParameter("intrinsics: fx, fy must be positive");
    if (width <= 0 || height <= 0) throw InvalidParameter("intrinsics: image size must be positive");
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
      throw InvalidParameter("intrinsics: principal point outside the image");
  }

  /// Intrinsics of pyramid level `level` (resolution halved per level).
  CameraIntrinsics level(int level) const {
    CameraIntrinsics k = *this;
    for (int l = 0; l < level; ++l) {
      k.fx *= 0.5;
      k.fy *= 0.5;
      k.cx *= 0.5;
      k.cy *= 0.5;
      k.width /= 2;
      k.height /= 2;
    }
    return k;
  }

  /// K^-1 (u, v, 1): camera-frame ray with unit z.
  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  Vec2 project(const Vec3& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

}  // namespace discsplat
