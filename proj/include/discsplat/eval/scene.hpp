#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "discsplat/core/camera.hpp"
#include "discsplat/core/errors.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/io/png.hpp"
#include "discsplat/io/sequence.hpp"

namespace discsplat {

/// Procedural scene description; every field can be set from "key=value".
struct SceneSpec {
  std::string geometry = "box_room";   // box_room | planes
  std::string texture = "checker_noise";  // checker_noise | checker | noise
  std::string trajectory = "orbit";   // orbit | line | static
  int width = 320;
  int height = 240;
  int frames = 100;
  uint64_t seed = 0;
  /// Horizontal field of view, degrees.
  double fov_deg = 65.0;
  double room_x = 4.0, room_y = 4.0, room_z = 2.5;
  double orbit_radius = 0.5;
  double orbit_arc_deg = 60.0;
  double camera_height = 1.6;
  /// Height of the point the camera looks at.
  double target_height = 1.0;
  double line_length = 0.5;
  double depth_scale = 5000.0;
  double fps = 30.0;
  double checker_period = 0.5;
  double noise_period = 0.3;

  void set(const std::string& key, const std::string& value) {
    auto num = [&](double& d) {
      try {
        size_t used = 0;
        d = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw ConfigError("scene spec field '" + key + "': cannot parse '" + value + "'");
      }
    };
    auto integer = [&](auto& out) {
      double d;
      num(d);
      if (d != std::floor(d) || d < 0) throw ConfigError("scene spec field '" + key + "': expected an integer");
      out = static_cast<std::decay_t<decltype(out)>>(d);
    };
    auto choice = [&](std::string& out, std::initializer_list<const char*> ok) {
      for (const char* o : ok)
        if (value == o) {
          out = value;
          return;
        }
      throw ConfigError("scene spec field '" + key + "': invalid value '" + value + "'");
    };
    if (key == "geometry") choice(geometry, {"box_room", "planes"});
    else if (key == "texture") choice(texture, {"checker_noise", "checker", "noise"});
    else if (key == "trajectory") choice(trajectory, {"orbit", "line", "static"});
    else if (key == "width") integer(width);
    else if (key == "height") integer(height);
    else if (key == "frames") integer(frames);
    else if (key == "seed") integer(seed);
    else if (key == "fov_deg") num(fov_deg);
    else if (key == "room_x") num(room_x);
    else if (key == "room_y") num(room_y);
    else if (key == "room_z") num(room_z);
    else if (key == "orbit_radius") num(orbit_radius);
    else if (key == "orbit_arc_deg") num(orbit_arc_deg);
    else if (key == "camera_height") num(camera_height);
    else if (key == "target_height") num(target_height);
    else if (key == "line_length") num(line_length);
    else if (key == "depth_scale") num(depth_scale);
    else if (key == "fps") num(fps);
    else if (key == "checker_period") num(checker_period);
    else if (key == "noise_period") num(noise_period);
    else throw ConfigError("unknown scene spec field '" + key + "'");
  }

  void validate() const {
    auto req = [](bool ok, const char* field) {
      if (!ok) throw ConfigError(std::string("invalid scene spec field '") + field + "'");
    };
    req(width >= 8 && width % 4 == 0, "width");
    req(height >= 8 && height % 4 == 0, "height");
    req(frames >= 1, "frames");
    req(fov_deg > 10 && fov_deg < 150, "fov_deg");
    req(room_x > 0.5 && room_y > 0.5 && room_z > 0.5, "room_x");
    req(depth_scale > 0 && 10.0 * depth_scale <= 65535.0, "depth_scale");
    req(fps > 0, "fps");
    req(checker_period > 0 && noise_period > 0, "checker_period");
  }

  CameraIntrinsics intrinsics() const {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.5 * width / std::tan(0.5 * fov_deg * M_PI / 180.0);
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    k.depth_scale = depth_scale;
    return k;
  }
};

/// Applies comma- or whitespace-separated key=value pairs.
inline SceneSpec parse_scene_spec(const std::string& text, SceneSpec spec = {}) {
  std::string t = text;
  for (char& c : t)
    if (c == ',') c = ' ';
  std::istringstream ss(t);
  std::string item;
  while (ss >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("scene spec: expected key=value, got '" + item + "'");
    spec.set(item.substr(0, eq), item.substr(eq + 1));
  }
  return spec;
}

/// Analytic scene made of planar rectangles.
class SyntheticScene {
 public:
  struct Quad {
    Vec3 center, normal, u_axis, v_axis;
    double half_u, half_v;
    Vec3 base_color;
    int id;
  };

  explicit SyntheticScene(const SceneSpec& spec) : spec_(spec) {
    spec.validate();
    const double hx = 0.5 * spec.room_x, hy = 0.5 * spec.room_y, h = spec.room_z;
    if (spec.geometry == "box_room") {
      // Inward-facing walls, floor at z = 0 and ceiling at z = room_z (z up).
      add({hx, 0, h / 2}, {-1, 0, 0}, {0, 1, 0}, hy, h / 2, {0.75, 0.55, 0.45});
      add({-hx, 0, h / 2}, {1, 0, 0}, {0, 1, 0}, hy, h / 2, {0.45, 0.6, 0.75});
      add({0, hy, h / 2}, {0, -1, 0}, {1, 0, 0}, hx, h / 2, {0.55, 0.7, 0.45});
      add({0, -hy, h / 2}, {0, 1, 0}, {1, 0, 0}, hx, h / 2, {0.7, 0.65, 0.4});
      add({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, hx, hy, {0.5, 0.45, 0.4});
      add({0, 0, h}, {0, 0, -1}, {1, 0, 0}, hx, hy, {0.8, 0.8, 0.75});
      // Tent-shaped roof on the floor beyond the room center, ridge along y.
      // Its tilted faces fix sideways motion and yaw without being seen at
      // grazing angles from above.
      const double half_w = 0.4, rise = 0.2, half_len = 0.5, yc = 0.8;
      const double half_slope = 0.5 * std::hypot(half_w, rise);
      add({0.5 * half_w, yc, 0.5 * rise}, {rise, 0, half_w}, {0, 1, 0}, half_len, half_slope, {0.8, 0.35, 0.3});
      add({-0.5 * half_w, yc, 0.5 * rise}, {-rise, 0, half_w}, {0, 1, 0}, half_len, half_slope, {0.3, 0.35, 0.8});
    } else {
      // Camera-facing arrangement in front of the origin camera (+z forward,
      // y down): a back wall and three tilted boards, all seen well inside
      // 60 degrees from their normals.
      add({0, 0, 3.2}, {0, 0, -1}, {1, 0, 0}, 3.0, 3.0, {0.6, 0.55, 0.5});
      board({-0.75, -0.25, 2.3}, Quat(Eigen::AngleAxisd(-0.7, Vec3::UnitY())), 0.55, 0.5, {0.8, 0.4, 0.35});
      board({0.7, -0.15, 2.0},
            Eigen::AngleAxisd(0.5, Vec3::UnitY()) * Eigen::AngleAxisd(0.4, Vec3::UnitX()), 0.4, 0.4,
            {0.35, 0.45, 0.8});
      board({0.0, 0.65, 2.5}, Quat(Eigen::AngleAxisd(-0.85, Vec3::UnitX())), 0.9, 0.45, {0.5, 0.65, 0.4});
    }
  }

  const SceneSpec& spec() const { return spec_; }

  /// Nearest hit along a world ray: depth parameter and color. t < 0 on miss.
  std::pair<double, Vec3> trace(const Vec3& origin, const Vec3& dir) const {
    double best = -1.0;
    const Quad* hit = nullptr;
    Vec3 hit_point;
    for (const Quad& q : quads_) {
      const double denom = dir.dot(q.normal);
      if (denom >= 0.0) continue;  // back face
      const double t = (q.center - origin).dot(q.normal) / denom;
      if (t <= 1e-9 || (best >= 0.0 && t >= best)) continue;
      const Vec3 p = origin + t * dir;
      const Vec3 d = p - q.center;
      if (std::abs(d.dot(q.u_axis)) > q.half_u || std::abs(d.dot(q.v_axis)) > q.half_v) continue;
      best = t;
      hit = &q;
      hit_point = p;
    }
    if (!hit) return {-1.0, Vec3::Zero()};
    const Vec3 d = hit_point - hit->center;
    return {best, texture(*hit, d.dot(hit->u_axis), d.dot(hit->v_axis))};
  }

  /// Camera poses (world-from-camera, OpenCV axes), quantized through the
  /// quaternion form so that they match what a manifest stores.
  std::vector<Pose> poses() const {
    std::vector<Pose> out;
    const int n = spec_.frames;
    for (int i = 0; i < n; ++i) {
      const double s = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
      Pose p;
      if (spec_.geometry == "planes") {
        p = Pose::identity();
        if (spec_.trajectory == "line") p.translation = Vec3(spec_.line_length * (s - 0.5), 0, 0);
        if (spec_.trajectory == "orbit") {
          const double a = (s - 0.5) * spec_.orbit_arc_deg * M_PI / 180.0 * 0.25;
          p.rotation = Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
          p.translation = Vec3(-std::sin(a) * 2.0, 0, 2.0 - std::cos(a) * 2.0);
        }
      } else {
        Vec3 eye, target;
        if (spec_.trajectory == "orbit") {
          const double a = (s - 0.5) * spec_.orbit_arc_deg * M_PI / 180.0 - 0.5 * M_PI;
          eye = Vec3(spec_.orbit_radius * std::cos(a), spec_.orbit_radius * std::sin(a), spec_.camera_height);
          target = Vec3(0, 0, spec_.target_height);
        } else {
          const double off = spec_.trajectory == "line" ? spec_.line_length * (s - 0.5) : 0.0;
          eye = Vec3(off, -spec_.orbit_radius, spec_.camera_height);
          target = Vec3(off, 0, spec_.target_height);
        }
        p = look_at(eye, target);
      }
      const Quat q = p.quaternion();
      p.rotation = Pose::from_quaternion(q, p.translation).rotation;
      out.push_back(p);
    }
    return out;
  }

  RGBDFrame render(const Pose& pose, const CameraIntrinsics& k) const {
    RGBDFrame f;
    f.color = ColorImage(k.width, k.height, Vec3::Zero());
    f.depth = DepthImage(k.width, k.height, 0.0);
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) {
        const Vec3 ray = k.ray(x, y);
        auto [t, c] = trace(pose.translation, pose.rotation * ray);
        if (t < 0.0) continue;
        f.depth(x, y) = t;  // ray has unit z, so t is the camera-frame depth
        f.color(x, y) = c;
      }
    return f;
  }

  static Pose look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(Vec3::UnitZ());
    if (x.norm() < 1e-9) x = Vec3::UnitX();
    x.normalize();
    const Vec3 y = z.cross(x);
    Pose p;
    p.rotation.col(0) = x;
    p.rotation.col(1) = y;
    p.rotation.col(2) = z;
    p.translation = eye;
    return p;
  }

 private:
  void add(const Vec3& c, const Vec3& n, const Vec3& u, double hu, double hv, const Vec3& color) {
    const Vec3 nn = n.normalized(), uu = u.normalized();
    quads_.push_back({c, nn, uu, nn.cross(uu).normalized(), hu, hv, color, static_cast<int>(quads_.size())});
  }

  /// Rectangle whose normal is -z rotated by `r`.
  void board(const Vec3& c, const Quat& r, double hu, double hv, const Vec3& color) {
    add(c, r * Vec3(0, 0, -1), r * Vec3(1, 0, 0), hu, hv, color);
  }

  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  double lattice(int64_t i, int64_t j, int face, int channel) const {
    uint64_t h = mix(spec_.seed ^ mix(static_cast<uint64_t>(i) * 73856093ULL ^ static_cast<uint64_t>(j) * 19349663ULL ^
                                      static_cast<uint64_t>(face * 4 + channel) * 83492791ULL));
    return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
  }

  /// Smoothly interpolated lattice noise in [0, 1].
  double value_noise(double a, double b, int face, int channel) const {
    const double fa = a / spec_.noise_period, fb = b / spec_.noise_period;
    const double ia = std::floor(fa), ib = std::floor(fb);
    const double ta = fa - ia, tb = fb - ib;
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double sa = smooth(ta), sb = smooth(tb);
    const auto i = static_cast<int64_t>(ia), j = static_cast<int64_t>(ib);
    const double v00 = lattice(i, j, face, channel), v10 = lattice(i + 1, j, face, channel);
    const double v01 = lattice(i, j + 1, face, channel), v11 = lattice(i + 1, j + 1, face, channel);
    return (v00 * (1 - sa) + v10 * sa) * (1 - sb) + (v01 * (1 - sa) + v11 * sa) * sb;
  }

  Vec3 texture(const Quad& q, double a, double b) const {
    const double w = 2.0 * M_PI / spec_.checker_period;
    const double checker = 0.5 + 0.5 * std::sin(w * a) * std::sin(w * b);
    Vec3 c = q.base_color;
    if (spec_.texture != "noise") c = c.cwiseProduct(Vec3::Constant(0.65 + 0.35 * checker));
    if (spec_.texture != "checker")
      for (int ch = 0; ch < 3; ++ch) c[ch] += 0.25 * (value_noise(a, b, q.id, ch) - 0.5);
    return c.cwiseMax(0.0).cwiseMin(1.0);
  }

  SceneSpec spec_;
  std::vector<Quad> quads_;
};

/// Writes a synthetic-format dataset (PNG frames + manifest) into `dir`.
inline SequenceSource make_scene(const SceneSpec& spec, const std::string& dir) {
  spec.validate();
  SyntheticScene scene(spec);
  const CameraIntrinsics k = spec.intrinsics();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "color");
  fs::create_directories(fs::path(dir) / "depth");
  const auto poses = scene.poses();
  std::vector<FrameDescriptor> frames;
  for (size_t i = 0; i < poses.size(); ++i) {
    RGBDFrame f = scene.render(poses[i], k);
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    png::write_color((fs::path(dir) / "color" / name).string(), f.color);
    png::write_depth((fs::path(dir) / "depth" / name).string(), f.depth, k.depth_scale);
    FrameDescriptor fd;
    fd.timestamp = static_cast<double>(i) / spec.fps;
    fd.color_path = std::string("color/") + name;
    fd.depth_path = std::string("depth/") + name;
    fd.pose = poses[i];
    frames.push_back(fd);
  }
  write_synthetic_manifest(dir, k, frames);
  return load_synthetic_sequence(dir);
}

}  // namespace discsplat
