#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace discsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Quat = Eigen::Quaterniond;

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

/// Rigid transform, world-from-camera when used as a camera pose.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  static Pose from_quaternion(const Quat& q, const Vec3& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  Quat quaternion() const { return Quat(rotation).normalized(); }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 operator*(const Vec3& p) const { return apply(p); }

  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  Pose inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  /// Projects the rotation back onto SO(3).
  void orthonormalize() {
    Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Mat3 u = svd.matrixU();
      u.col(2) *= -1.0;
      r = u * svd.matrixV().transpose();
    }
    rotation = r;
  }

  bool is_valid(double tol = 1e-6) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
  }
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose inverse(const Pose& p) { return p.inverse(); }

/// Rotation angle of R in radians, in [0, pi].
inline double rotation_angle(const Mat3& r) {
  double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

inline Mat3 so3_exp(const Vec3& omega) {
  double theta = omega.norm();
  if (theta < 1e-12) return Mat3::Identity() + hat(omega);
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

inline Vec3 so3_log(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// Exponential map; xi = (translation part rho, rotation part omega).
inline Pose se3_exp(const Vec6& xi) {
  Vec3 rho = xi.head<3>();
  Vec3 omega = xi.tail<3>();
  double theta = omega.norm();
  Mat3 w = hat(omega);
  Mat3 v;
  if (theta < 1e-6) {
    v = Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  } else {
    double t2 = theta * theta;
    v = Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * w +
        ((theta - std::sin(theta)) / (t2 * theta)) * w * w;
  }
  return {so3_exp(omega), v * rho};
}

inline Vec6 se3_log(const Pose& p) {
  Vec3 omega = so3_log(p.rotation);
  double theta = omega.norm();
  Mat3 w = hat(omega);
  Mat3 v_inv;
  if (theta < 1e-6) {
    v_inv = Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
  } else {
    double half = 0.5 * theta;
    double coef = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
    v_inv = Mat3::Identity() - 0.5 * w + coef * w * w;
  }
  Vec6 xi;
  xi.head<3>() = v_inv * p.translation;
  xi.tail<3>() = omega;
  return xi;
}

}  // namespace discsplat
