#pragma once

#include <array>
#include <cmath>

#include "discsplat/core/se3.hpp"

// Real spherical harmonics up to degree 3 in the ordering used by common
// Gaussian splatting code, with analytic derivatives w.r.t. the direction.
namespace discsplat::sh {

inline constexpr int kMaxDegree = 3;
inline constexpr int kMaxCoeffs = 16;
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};
inline constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                  0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                  -0.5900435899266435};
/// Offset added to the SH expansion so that zero coefficients mean mid gray.
inline constexpr double kColorOffset = 0.5;

constexpr int coeff_count(int degree) { return (degree + 1) * (degree + 1); }

struct Basis {
  std::array<double, kMaxCoeffs> value{};
  std::array<Vec3, kMaxCoeffs> grad{};  // d value / d direction (direction held unnormalized-free)
};

/// Evaluates the basis for a unit direction; gradients are w.r.t. the
/// direction components treated as independent variables.
inline Basis evaluate(const Vec3& dir, int degree, bool with_grad) {
  Basis b;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  b.value[0] = kC0;
  if (with_grad) b.grad[0].setZero();
  if (degree < 1) return b;
  b.value[1] = -kC1 * y;
  b.value[2] = kC1 * z;
  b.value[3] = -kC1 * x;
  if (with_grad) {
    b.grad[1] = {0.0, -kC1, 0.0};
    b.grad[2] = {0.0, 0.0, kC1};
    b.grad[3] = {-kC1, 0.0, 0.0};
  }
  if (degree < 2) return b;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, yz = y * z, xz = x * z;
  b.value[4] = kC2[0] * xy;
  b.value[5] = kC2[1] * yz;
  b.value[6] = kC2[2] * (2.0 * zz - xx - yy);
  b.value[7] = kC2[3] * xz;
  b.value[8] = kC2[4] * (xx - yy);
  if (with_grad) {
    b.grad[4] = {kC2[0] * y, kC2[0] * x, 0.0};
    b.grad[5] = {0.0, kC2[1] * z, kC2[1] * y};
    b.grad[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z};
    b.grad[7] = {kC2[3] * z, 0.0, kC2[3] * x};
    b.grad[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0.0};
  }
  if (degree < 3) return b;
  b.value[9] = kC3[0] * y * (3.0 * xx - yy);
  b.value[10] = kC3[1] * xy * z;
  b.value[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  b.value[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b.value[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  b.value[14] = kC3[5] * z * (xx - yy);
  b.value[15] = kC3[6] * x * (xx - 3.0 * yy);
  if (with_grad) {
    b.grad[9] = {kC3[0] * 6.0 * xy, kC3[0] * (3.0 * xx - 3.0 * yy), 0.0};
    b.grad[10] = {kC3[1] * yz, kC3[1] * xz, kC3[1] * xy};
    b.grad[11] = {kC3[2] * (-2.0 * xy), kC3[2] * (4.0 * zz - xx - 3.0 * yy), kC3[2] * 8.0 * yz};
    b.grad[12] = {kC3[3] * (-6.0 * xz), kC3[3] * (-6.0 * yz), kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
    b.grad[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - yy), kC3[4] * (-2.0 * xy), kC3[4] * 8.0 * xz};
    b.grad[14] = {kC3[5] * 2.0 * xz, kC3[5] * (-2.0 * yz), kC3[5] * (xx - yy)};
    b.grad[15] = {kC3[6] * (3.0 * xx - 3.0 * yy), kC3[6] * (-6.0 * xy), 0.0};
  }
  return b;
}

/// DC coefficient whose evaluated color equals `rgb`.
inline Vec3 dc_from_color(const Vec3& rgb) { return (rgb.array() - kColorOffset) / kC0; }

}  // namespace discsplat::sh
