#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/gaussian.hpp"
#include "discsplat/core/se3.hpp"

namespace discsplat {

/// Added to the 2D covariance diagonal, px^2.
inline constexpr double kCov2dRegularization = 0.3;
/// Gaussians whose center is closer than this (camera z, meters) are culled.
inline constexpr double kNearPlane = 0.01;
/// Footprint half-extent in standard deviations used for culling and binning.
inline constexpr double kFootprintSigmas = 3.0;

/// A Gaussian splatted into one view.
struct ProjectedGaussian {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double view_depth = 0.0;
  Vec3 color_eval = Vec3::Zero();
  uint32_t source_index = 0;

  /// Inverse of cov2d as (xx, xy, yy).
  std::array<double, 3> conic{};
  double opacity = 0.0;
  bool opaque = false;
  bool stable = false;
  Vec3 p_cam = Vec3::Zero();
  /// Unit normal from the rotation (sign as stored), camera and world frames.
  Vec3 n_cam = Vec3::Zero();
  Vec3 n_world = Vec3::Zero();
  /// Unit direction from camera center to the Gaussian, world frame.
  Vec3 view_dir = Vec3::Zero();
  double view_dist = 0.0;
  std::array<bool, 3> color_clamped{};
  /// Inclusive pixel rectangle covered by the footprint's bounding box.
  int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

/// Projects `g` through camera `pose` (world-from-camera). Returns nullopt when
/// the center is behind the near plane or the footprint misses the image.
inline std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g, const Pose& pose,
                                                         const CameraIntrinsics& k, int sh_degree,
                                                         uint32_t source_index = 0) {
  const Mat3 w = pose.rotation.transpose();
  const Vec3 pc = w * (g.position - pose.translation);
  if (!(pc.z() > kNearPlane)) return std::nullopt;

  const double z = pc.z(), z2 = z * z;
  Eigen::Matrix<double, 2, 3> jac;
  jac << k.fx / z, 0.0, -k.fx * pc.x() / z2,
         0.0, k.fy / z, -k.fy * pc.y() / z2;
  const Mat3 rq = rotation_matrix(g.rotation);
  const Mat3 ms = rq * g.scale.asDiagonal();
  const Mat3 cov3 = ms * ms.transpose();
  const Mat3 cov_cam = w * cov3 * w.transpose();
  Mat2 cov2 = jac * cov_cam * jac.transpose();
  cov2(0, 1) = cov2(1, 0) = 0.5 * (cov2(0, 1) + cov2(1, 0));
  cov2(0, 0) += kCov2dRegularization;
  cov2(1, 1) += kCov2dRegularization;
  const double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(0, 1);
  if (!(det > 0.0)) return std::nullopt;

  ProjectedGaussian pg;
  pg.mean2d = k.project(pc);
  pg.cov2d = cov2;
  pg.view_depth = z;
  pg.source_index = source_index;
  pg.conic = {cov2(1, 1) / det, -cov2(0, 1) / det, cov2(0, 0) / det};
  pg.opacity = g.opacity;
  pg.opaque = g.is_opaque();
  pg.stable = g.is_stable();
  pg.p_cam = pc;
  pg.n_world = rq.col(normal_axis(g.scale));
  pg.n_cam = w * pg.n_world;

  const double hx = kFootprintSigmas * std::sqrt(cov2(0, 0));
  const double hy = kFootprintSigmas * std::sqrt(cov2(1, 1));
  pg.x_min = std::max(0, static_cast<int>(std::ceil(pg.mean2d.x() - hx)));
  pg.x_max = std::min(k.width - 1, static_cast<int>(std::floor(pg.mean2d.x() + hx)));
  pg.y_min = std::max(0, static_cast<int>(std::ceil(pg.mean2d.y() - hy)));
  pg.y_max = std::min(k.height - 1, static_cast<int>(std::floor(pg.mean2d.y() + hy)));
  if (pg.x_min > pg.x_max || pg.y_min > pg.y_max) return std::nullopt;

  Vec3 offset = g.position - pose.translation;
  pg.view_dist = offset.norm();
  pg.view_dir = pg.view_dist > 0.0 ? Vec3(offset / pg.view_dist) : Vec3::UnitZ();
  auto basis = sh::evaluate(pg.view_dir, sh_degree, false);
  Vec3 c = Vec3::Constant(sh::kColorOffset);
  for (int i = 0; i < sh::coeff_count(sh_degree); ++i) c += basis.value[i] * g.sh[i];
  for (int ch = 0; ch < 3; ++ch) {
    pg.color_clamped[ch] = c[ch] < 0.0;
    if (c[ch] < 0.0) c[ch] = 0.0;
  }
  pg.color_eval = c;
  return pg;
}

/// Screen-space gradients accumulated for one projected Gaussian.
struct ScreenGradient {
  Vec2 mean = Vec2::Zero();
  /// dL/d conic entries; `xy` is the derivative w.r.t. the shared off-diagonal.
  double conic_xx = 0.0, conic_xy = 0.0, conic_yy = 0.0;
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  /// dL/d view depth of the center (alpha-blended depth only).
  double view_depth = 0.0;
  /// Ray/disc intersection depth path, world frame.
  Vec3 depth_position = Vec3::Zero();
  Vec3 depth_normal = Vec3::Zero();

  ScreenGradient& operator+=(const ScreenGradient& o) {
    mean += o.mean;
    conic_xx += o.conic_xx;
    conic_xy += o.conic_xy;
    conic_yy += o.conic_yy;
    color += o.color;
    opacity += o.opacity;
    view_depth += o.view_depth;
    depth_position += o.depth_position;
    depth_normal += o.depth_normal;
    return *this;
  }
};

struct ParameterGradient {
  Vec3 position = Vec3::Zero();
  Vec3 scale = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();  // (w, x, y, z)
  double opacity = 0.0;
};

/// dL/dq for q -> R(q / |q|) given dL/dR.
inline Vec4 quaternion_gradient(const Quat& q_raw, const Mat3& g) {
  const double norm = q_raw.norm();
  const Quat q = q_raw.normalized();
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Vec4 dq;
  dq[0] = 2.0 * (z * (g(1, 0) - g(0, 1)) + y * (g(0, 2) - g(2, 0)) + x * (g(2, 1) - g(1, 2)));
  dq[1] = 2.0 * (y * (g(1, 0) + g(0, 1)) + z * (g(2, 0) + g(0, 2)) + w * (g(2, 1) - g(1, 2))) -
          4.0 * x * (g(1, 1) + g(2, 2));
  dq[2] = 2.0 * (x * (g(1, 0) + g(0, 1)) + w * (g(0, 2) - g(2, 0)) + z * (g(2, 1) + g(1, 2))) -
          4.0 * y * (g(0, 0) + g(2, 2));
  dq[3] = 2.0 * (w * (g(1, 0) - g(0, 1)) + x * (g(2, 0) + g(0, 2)) + y * (g(2, 1) + g(1, 2))) -
          4.0 * z * (g(0, 0) + g(1, 1));
  Vec4 qv(w, x, y, z);
  return (dq - qv * qv.dot(dq)) / norm;
}

/// Chains screen-space gradients back to the Gaussian's parameters. SH
/// gradients are written to `d_sh` (one RGB triple per coefficient).
inline ParameterGradient backprop_projection(const Gaussian& g, const ProjectedGaussian& pg,
                                             const ScreenGradient& sg, const Pose& pose,
                                             const CameraIntrinsics& k, int sh_degree, Vec3* d_sh) {
  ParameterGradient out;
  const Mat3 w = pose.rotation.transpose();
  const Vec3& pc = pg.p_cam;
  const double z = pc.z(), z2 = z * z, z3 = z2 * z;
  Eigen::Matrix<double, 2, 3> jac;
  jac << k.fx / z, 0.0, -k.fx * pc.x() / z2,
         0.0, k.fy / z, -k.fy * pc.y() / z2;
  const Mat3 rq = rotation_matrix(g.rotation);
  const Vec3 s2 = g.scale.cwiseProduct(g.scale);
  const Mat3 cov3 = rq * s2.asDiagonal() * rq.transpose();
  const Mat3 cov_cam = w * cov3 * w.transpose();

  Mat2 a;
  a << pg.conic[0], pg.conic[1], pg.conic[1], pg.conic[2];
  Mat2 ga;
  ga << sg.conic_xx, 0.5 * sg.conic_xy, 0.5 * sg.conic_xy, sg.conic_yy;
  const Mat2 g_cov2 = -a * ga * a;
  const Mat3 g_cov_cam = jac.transpose() * g_cov2 * jac;
  const Eigen::Matrix<double, 2, 3> g_jac = 2.0 * g_cov2 * jac * cov_cam;

  Vec3 d_pc = jac.transpose() * sg.mean;
  d_pc.x() += g_jac(0, 2) * (-k.fx / z2);
  d_pc.y() += g_jac(1, 2) * (-k.fy / z2);
  d_pc.z() += g_jac(0, 0) * (-k.fx / z2) + g_jac(0, 2) * (2.0 * k.fx * pc.x() / z3) +
              g_jac(1, 1) * (-k.fy / z2) + g_jac(1, 2) * (2.0 * k.fy * pc.y() / z3);
  d_pc.z() += sg.view_depth;
  out.position = pose.rotation * d_pc + sg.depth_position;

  const Mat3 g_cov3 = w.transpose() * g_cov_cam * w;
  for (int i = 0; i < 3; ++i)
    out.scale[i] = 2.0 * g.scale[i] * rq.col(i).dot(g_cov3 * rq.col(i));
  Mat3 g_rq = 2.0 * g_cov3 * rq * s2.asDiagonal();
  g_rq.col(normal_axis(g.scale)) += sg.depth_normal;
  out.rotation = quaternion_gradient(g.rotation, g_rq);
  out.opacity = sg.opacity;

  // View-dependent color.
  Vec3 dc = sg.color;
  for (int ch = 0; ch < 3; ++ch)
    if (pg.color_clamped[ch]) dc[ch] = 0.0;
  const int n = sh::coeff_count(sh_degree);
  auto basis = sh::evaluate(pg.view_dir, sh_degree, true);
  Vec3 d_dir = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    d_sh[i] = basis.value[i] * dc;
    d_dir += dc.dot(g.sh[i]) * basis.grad[i];
  }
  if (pg.view_dist > 0.0) {
    const Vec3& u = pg.view_dir;
    out.position += (d_dir - u * u.dot(d_dir)) / pg.view_dist;
  }
  return out;
}

}  // namespace discsplat
