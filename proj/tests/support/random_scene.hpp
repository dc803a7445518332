#pragma once

#include <random>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/core/image.hpp"

namespace discsplat::testing {

struct RandomScene {
  GaussianMap map;
  Pose pose;
  CameraIntrinsics k;
};

inline CameraIntrinsics square_camera(int size) {
  CameraIntrinsics k;
  k.width = k.height = size;
  k.fx = k.fy = 1.1 * size;
  k.cx = k.cy = 0.5 * (size - 1) + 0.13;
  return k;
}

inline Quat random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

/// Gaussians scattered in front of a randomly placed camera, mostly disc
/// shaped, mixing opaque and transparent kinds.
inline RandomScene random_scene(std::mt19937_64& rng, int count, int size, int sh_degree = 2,
                                double transparent_share = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomScene s{GaussianMap(sh_degree), Pose::identity(), square_camera(size)};
  s.pose.rotation = rotation_matrix(Quat(Eigen::AngleAxisd(0.3 * (u(rng) - 0.5), Vec3::UnitY()) *
                                         Eigen::AngleAxisd(0.3 * (u(rng) - 0.5), Vec3::UnitX())));
  s.pose.translation = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
  for (int i = 0; i < count; ++i) {
    Gaussian g;
    const double z = 1.5 + 2.5 * u(rng);
    const Vec3 pc(z * 0.45 * (2 * u(rng) - 1), z * 0.45 * (2 * u(rng) - 1), z);
    g.position = s.pose * pc;
    g.rotation = random_quaternion(rng);
    const bool transparent = u(rng) < transparent_share;
    if (transparent) {
      g.kind = GaussianKind::Transparent;
      g.opacity = kTransparentOpacity;
      g.scale = Vec3(0.004 + 0.006 * u(rng), 0.004 + 0.006 * u(rng), 0.001 + 0.002 * u(rng)) * (z / 1.5);
    } else {
      g.scale = Vec3(0.05 + 0.2 * u(rng), 0.05 + 0.2 * u(rng), 0.005 + 0.02 * u(rng));
    }
    g.sh[0] = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 1.5;
    for (int c = 1; c < sh::coeff_count(sh_degree); ++c)
      g.sh[c] = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 0.2;
    g.state = u(rng) < 0.5 ? GaussianState::Stable : GaussianState::Unstable;
    g.set_anchor();
    s.map.add(g);
  }
  return s;
}

inline RGBDFrame random_target(std::mt19937_64& rng, const CameraIntrinsics& k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RGBDFrame f;
  f.color = ColorImage(k.width, k.height);
  f.depth = DepthImage(k.width, k.height);
  for (size_t i = 0; i < f.color.size(); ++i) {
    f.color[i] = Vec3(u(rng), u(rng), u(rng));
    f.depth[i] = u(rng) < 0.05 ? 0.0 : 1.0 + 3.5 * u(rng);
  }
  return f;
}

}  // namespace discsplat::testing
