#pragma once

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/io/sequence.hpp"
#include "discsplat/io/trajectory.hpp"
#include "discsplat/preproc/frame_preproc.hpp"

namespace discsplat {

/// PSNR value reported for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Translational RMSE (centimeters) after the closed-form rigid alignment of
/// the estimated positions onto the ground truth. Poses are paired by
/// timestamp within 0.02 s.
inline double ate_rmse(const Trajectory& estimate, const Trajectory& ground_truth,
                       double max_gap = kAssociationMaxGap) {
  std::vector<double> ta, tb;
  for (const auto& p : estimate) ta.push_back(p.timestamp);
  for (const auto& p : ground_truth) tb.push_back(p.timestamp);
  const auto pairs = associate_stamps(ta, tb, max_gap);
  if (pairs.size() < 3) throw EvaluationError("ate: need at least 3 associated poses, got " + std::to_string(pairs.size()));
  Eigen::Matrix3Xd src(3, pairs.size()), dst(3, pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    src.col(i) = estimate[pairs[i].first].pose.translation;
    dst.col(i) = ground_truth[pairs[i].second].pose.translation;
  }
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
  double sum = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const Vec3 a = t.topLeftCorner<3, 3>() * src.col(i) + t.topRightCorner<3, 1>();
    sum += (a - dst.col(i)).squaredNorm();
  }
  return 100.0 * std::sqrt(sum / static_cast<double>(pairs.size()));
}

/// 10 log10(1 / MSE) over all channels of [0,1] images, optionally on a mask.
inline double psnr(const ColorImage& a, const ColorImage& b, const Mask* mask = nullptr) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    se += (a[i] - b[i]).squaredNorm();
    n += 3;
  }
  if (n == 0) throw EvaluationError("psnr: no pixels");
  if (se == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(static_cast<double>(n) / se);
}

/// Percentage of valid-depth pixels whose rendered depth exists and lies
/// within tau meters.
inline double depth_accuracy_ratio(const DepthImage& rendered, const DepthImage& depth, double tau) {
  require_same_shape(rendered, depth, "depth_accuracy_ratio");
  if (!(tau > 0.0)) throw InvalidParameter("depth_accuracy_ratio: tau must be positive");
  size_t valid = 0, good = 0;
  for (size_t i = 0; i < depth.size(); ++i) {
    if (!depth_is_valid(depth[i])) continue;
    ++valid;
    if (rendered[i] != -1.0 && std::abs(rendered[i] - depth[i]) < tau) ++good;
  }
  if (valid == 0) throw EvaluationError("depth_accuracy_ratio: no valid depth pixels");
  return 100.0 * static_cast<double>(good) / static_cast<double>(valid);
}

}  // namespace discsplat
