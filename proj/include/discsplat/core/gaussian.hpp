#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Eigenvalues>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/se3.hpp"
#include "discsplat/core/sh.hpp"

namespace discsplat {

enum class GaussianKind : uint8_t { Opaque = 0, Transparent = 1 };
enum class GaussianState : uint8_t { Unstable = 0, Stable = 1 };

inline constexpr double kOpaqueOpacity = 0.99;
inline constexpr double kTransparentOpacity = 0.1;
/// Largest creation scale of a transparent Gaussian, meters.
inline constexpr double kTransparentMaxScale = 0.01;
inline constexpr double kUnitQuatTolerance = 1e-6;
/// Scales closer than this are treated as tied when choosing the normal axis.
inline constexpr double kScaleTieTolerance = 1e-9;

inline double opacity_for(GaussianKind kind) {
  return kind == GaussianKind::Opaque ? kOpaqueOpacity : kTransparentOpacity;
}

/// Local axis carrying the normal: the smallest scale; among axes tied with
/// the minimum the highest index wins, so a fully isotropic Gaussian uses z.
inline int normal_axis(const Vec3& scale) {
  double smallest = scale.minCoeff();
  for (int axis = 2; axis >= 0; --axis) {
    if (scale[axis] - smallest < kScaleTieTolerance) return axis;
  }
  return 2;
}

/// Rotation matrix of a (possibly unnormalized) quaternion.
inline Mat3 rotation_matrix(const Quat& q) { return q.normalized().toRotationMatrix(); }

/// Quaternion whose rotation maps the local z axis onto `n`.
inline Quat quaternion_aligning_z(const Vec3& n) {
  return Quat::FromTwoVectors(Vec3::UnitZ(), n.normalized()).normalized();
}

inline void check_unit(const Quat& q) {
  if (std::abs(q.norm() - 1.0) > kUnitQuatTolerance)
    throw InvalidParameter("rotation quaternion is not unit length");
}

/// R diag(s)^2 R^T.
inline Mat3 covariance_from(const Vec3& scale, const Quat& rotation) {
  check_unit(rotation);
  if (!(scale.array() > 0.0).all()) throw InvalidParameter("scale components must be positive");
  Mat3 r = rotation.toRotationMatrix();
  Mat3 m = r * scale.asDiagonal();
  return m * m.transpose();
}

/// One splat: geometry, appearance and lifecycle bookkeeping.
struct Gaussian {
  Vec3 position = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Quat rotation = Quat::Identity();
  double opacity = kOpaqueOpacity;
  /// sh[k] holds the RGB coefficients of basis function k.
  std::array<Vec3, sh::kMaxCoeffs> sh{};
  uint32_t confidence_count = 0;
  uint32_t error_count = 0;
  int32_t created_at = 0;
  GaussianKind kind = GaussianKind::Opaque;
  GaussianState state = GaussianState::Unstable;
  // Creation geometry; the regularizer pins transparent Gaussians to it.
  Vec3 anchor_position = Vec3::Zero();
  Vec3 anchor_scale = Vec3::Ones();
  Quat anchor_rotation = Quat::Identity();

  Gaussian() {
    for (auto& c : sh) c.setZero();
  }

  Vec3 normal() const { return rotation_matrix(rotation).col(normal_axis(scale)); }
  bool is_stable() const { return state == GaussianState::Stable; }
  bool is_opaque() const { return kind == GaussianKind::Opaque; }

  void set_anchor() {
    anchor_position = position;
    anchor_scale = scale;
    anchor_rotation = rotation;
  }

  /// Evaluated color toward unit direction `dir` (camera to Gaussian).
  Vec3 color(const Vec3& dir, int degree) const {
    auto basis = sh::evaluate(dir, degree, false);
    Vec3 c = Vec3::Constant(sh::kColorOffset);
    for (int k = 0; k < sh::coeff_count(degree); ++k) c += basis.value[k] * sh[k];
    return c.cwiseMax(0.0);
  }
};

/// Unit normal of `g`: its rotated smallest axis. With `toward` given, the
/// sign is chosen so that normal . (toward - position) >= 0.
inline Vec3 gaussian_normal(const Gaussian& g) { return g.normal(); }

inline Vec3 gaussian_normal(const Gaussian& g, const Vec3& toward) {
  Vec3 n = g.normal();
  return n.dot(toward - g.position) < 0.0 ? Vec3(-n) : n;
}

inline bool satisfies_invariants(const Gaussian& g, std::string* why = nullptr) {
  auto fail = [&](const char* m) {
    if (why) *why = m;
    return false;
  };
  if (!(g.scale.array() > 0.0).all()) return fail("non-positive scale");
  if (std::abs(g.rotation.norm() - 1.0) > kUnitQuatTolerance) return fail("non-unit rotation");
  if (g.opacity != opacity_for(g.kind)) return fail("opacity inconsistent with kind");
  if (!g.position.allFinite()) return fail("non-finite position");
  return true;
}

}  // namespace discsplat
