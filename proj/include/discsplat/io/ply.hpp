#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/gaussian_map.hpp"

namespace discsplat {

inline constexpr int kPlyLayoutVersion = 1;

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

namespace detail {

enum class PlyType { Double, UInt8, UInt32, Int32 };

struct PlyProperty {
  std::string name;
  PlyType type;
};

inline const char* ply_type_name(PlyType t) {
  switch (t) {
    case PlyType::Double: return "double";
    case PlyType::UInt8: return "uchar";
    case PlyType::UInt32: return "uint";
    case PlyType::Int32: return "int";
  }
  return "";
}

/// Property list of layout version 1 for the given SH degree (order matters).
inline std::vector<PlyProperty> ply_layout(int sh_degree) {
  std::vector<PlyProperty> p;
  auto d = [&](const std::string& n) { p.push_back({n, PlyType::Double}); };
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) d(n);
  for (int c = 0; c < 3; ++c) d("f_dc_" + std::to_string(c));
  const int rest = sh::coeff_count(sh_degree) - 1;
  for (int i = 0; i < 3 * rest; ++i) d("f_rest_" + std::to_string(i));
  d("opacity");
  for (int a = 0; a < 3; ++a) d("scale_" + std::to_string(a));
  for (int a = 0; a < 4; ++a) d("rot_" + std::to_string(a));
  p.push_back({"kind", PlyType::UInt8});
  p.push_back({"state", PlyType::UInt8});
  p.push_back({"confidence", PlyType::UInt32});
  p.push_back({"errors", PlyType::UInt32});
  p.push_back({"created_at", PlyType::Int32});
  for (const char* n : {"anchor_x", "anchor_y", "anchor_z"}) d(n);
  for (int a = 0; a < 3; ++a) d("anchor_scale_" + std::to_string(a));
  for (int a = 0; a < 4; ++a) d("anchor_rot_" + std::to_string(a));
  return p;
}

template <typename T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <typename T>
T take(const char*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace detail

/// Binary little-endian PLY, one vertex per live Gaussian in slot order.
/// Field layout: docs/ply_layout.md.
inline std::string encode_ply(const GaussianMap& map) {
  const int deg = map.sh_degree();
  const int coeffs = sh::coeff_count(deg);
  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\n"
      << "comment discsplat-gaussians " << kPlyLayoutVersion << "\n"
      << "comment sh_degree " << deg << "\n"
      << "element vertex " << map.live_count() << "\n";
  for (const auto& p : detail::ply_layout(deg)) hdr << "property " << detail::ply_type_name(p.type) << ' ' << p.name << '\n';
  hdr << "end_header\n";
  std::string out = hdr.str();
  map.for_each_live([&](size_t, const Gaussian& g) {
    using detail::put;
    for (int a = 0; a < 3; ++a) put(out, g.position[a]);
    const Vec3 n = g.normal();
    for (int a = 0; a < 3; ++a) put(out, n[a]);
    for (int c = 0; c < 3; ++c) put(out, g.sh[0][c]);
    for (int c = 0; c < 3; ++c)
      for (int k = 1; k < coeffs; ++k) put(out, g.sh[k][c]);
    put(out, g.opacity);
    for (int a = 0; a < 3; ++a) put(out, g.scale[a]);
    for (double v : {g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()}) put(out, v);
    put(out, static_cast<uint8_t>(g.kind));
    put(out, static_cast<uint8_t>(g.state));
    put(out, g.confidence_count);
    put(out, g.error_count);
    put(out, g.created_at);
    for (int a = 0; a < 3; ++a) put(out, g.anchor_position[a]);
    for (int a = 0; a < 3; ++a) put(out, g.anchor_scale[a]);
    for (double v : {g.anchor_rotation.w(), g.anchor_rotation.x(), g.anchor_rotation.y(), g.anchor_rotation.z()})
      put(out, v);
  });
  return out;
}

inline GaussianMap decode_ply(const std::string& data, const std::string& name = "ply") {
  auto fail = [&](const std::string& why) -> void { throw LoadError(name + ": " + why); };
  const auto end = data.find("end_header\n");
  if (data.rfind("ply\n", 0) != 0 || end == std::string::npos) fail("not a PLY file");
  std::istringstream hdr(data.substr(0, end));
  std::string line;
  int version = -1, degree = -1;
  long long count = -1;
  std::vector<std::pair<std::string, std::string>> props;
  bool binary_le = false;
  while (std::getline(hdr, line)) {
    std::istringstream ss(line);
    std::string w;
    ss >> w;
    if (w == "format") {
      std::string f;
      ss >> f;
      binary_le = f == "binary_little_endian";
    } else if (w == "comment") {
      std::string key;
      ss >> key;
      if (key == "discsplat-gaussians") ss >> version;
      if (key == "sh_degree") ss >> degree;
    } else if (w == "element") {
      std::string e;
      ss >> e >> count;
      if (e != "vertex") fail("unexpected element '" + e + "'");
    } else if (w == "property") {
      std::string t, n;
      ss >> t >> n;
      props.emplace_back(t, n);
    }
  }
  if (!binary_le) fail("only binary_little_endian is supported");
  if (version != kPlyLayoutVersion)
    fail("unsupported layout version " + std::to_string(version) + " (expected " +
         std::to_string(kPlyLayoutVersion) + ")");
  if (degree < 0 || degree > sh::kMaxDegree) fail("missing or invalid sh_degree comment");
  if (count < 0) fail("missing vertex element");
  const auto layout = detail::ply_layout(degree);
  bool same = layout.size() == props.size();
  for (size_t i = 0; same && i < layout.size(); ++i)
    same = props[i].first == detail::ply_type_name(layout[i].type) && props[i].second == layout[i].name;
  if (!same) fail("unknown property layout for version " + std::to_string(version));

  size_t stride = 0;
  for (const auto& p : layout)
    stride += p.type == detail::PlyType::Double ? 8 : (p.type == detail::PlyType::UInt8 ? 1 : 4);
  const size_t body = end + std::string("end_header\n").size();
  if (data.size() - body != stride * static_cast<size_t>(count)) fail("vertex data size mismatch");

  GaussianMap map(degree);
  const int coeffs = sh::coeff_count(degree);
  const char* p = data.data() + body;
  using detail::take;
  for (long long v = 0; v < count; ++v) {
    Gaussian g;
    for (int a = 0; a < 3; ++a) g.position[a] = take<double>(p);
    p += 3 * sizeof(double);  // normal is derived
    for (int c = 0; c < 3; ++c) g.sh[0][c] = take<double>(p);
    for (int c = 0; c < 3; ++c)
      for (int k = 1; k < coeffs; ++k) g.sh[k][c] = take<double>(p);
    g.opacity = take<double>(p);
    for (int a = 0; a < 3; ++a) g.scale[a] = take<double>(p);
    double q[4];
    for (double& x : q) x = take<double>(p);
    g.rotation = Quat(q[0], q[1], q[2], q[3]);
    const uint8_t kind = take<uint8_t>(p), state = take<uint8_t>(p);
    if (kind > 1 || state > 1) fail("bad kind/state at vertex " + std::to_string(v));
    g.kind = static_cast<GaussianKind>(kind);
    g.state = static_cast<GaussianState>(state);
    g.confidence_count = take<uint32_t>(p);
    g.error_count = take<uint32_t>(p);
    g.created_at = take<int32_t>(p);
    for (int a = 0; a < 3; ++a) g.anchor_position[a] = take<double>(p);
    for (int a = 0; a < 3; ++a) g.anchor_scale[a] = take<double>(p);
    for (double& x : q) x = take<double>(p);
    g.anchor_rotation = Quat(q[0], q[1], q[2], q[3]);
    map.add(g);
  }
  return map;
}

inline void export_ply(const GaussianMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::string data = encode_ply(map);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing " + path);
}

inline GaussianMap import_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_ply(ss.str(), path);
}

}  // namespace discsplat
