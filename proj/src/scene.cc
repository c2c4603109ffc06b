#include "lpm/scene.h"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "lpm/rng.h"

namespace lpm {

namespace {

using Vec3 = Eigen::Vector3d;

struct Tokens {
  std::string directive;
  std::vector<std::string> positional;
  std::map<std::string, std::string> keys;
};

Tokens tokenize(const std::string& line, int line_no) {
  std::istringstream is(line);
  Tokens t;
  is >> t.directive;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      t.positional.push_back(tok);
    } else {
      const std::string key = tok.substr(0, eq);
      if (key.empty()) throw SceneParseError(line_no, "empty key in '" + tok + "'");
      if (!t.keys.emplace(key, tok.substr(eq + 1)).second) {
        throw SceneParseError(line_no, "duplicate key '" + key + "'");
      }
    }
  }
  return t;
}

double to_number(const std::string& s, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw SceneParseError(line_no, "expected a number, got '" + s + "'");
  }
  return v;
}

Vec3 to_vec3(const std::string& s, int line_no) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    parts.push_back(to_number(s.substr(start, comma - start), line_no));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) throw SceneParseError(line_no, "expected x,y,z, got '" + s + "'");
  return {parts[0], parts[1], parts[2]};
}

class KeyReader {
 public:
  KeyReader(Tokens& t, int line_no) : t_(t), line_(line_no) {}

  bool has(const std::string& key) const { return t_.keys.count(key) != 0; }
  std::string take(const std::string& key) {
    auto it = t_.keys.find(key);
    if (it == t_.keys.end()) throw SceneParseError(line_, "'" + t_.directive + "' needs " + key + "=");
    std::string v = it->second;
    t_.keys.erase(it);
    return v;
  }
  Vec3 vec(const std::string& key) { return to_vec3(take(key), line_); }
  double number(const std::string& key) { return to_number(take(key), line_); }
  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }
  void done() const {
    if (!t_.keys.empty()) {
      throw SceneParseError(line_, "unknown key '" + t_.keys.begin()->first + "' for '" +
                                       t_.directive + "'");
    }
  }

 private:
  Tokens& t_;
  int line_;
};

Texture read_texture(KeyReader& r, int line_no) {
  Texture tex;
  if (r.has("seed")) {
    const double s = r.number("seed");
    if (s < 0 || s != std::floor(s)) throw SceneParseError(line_no, "seed must be a non-negative integer");
    tex.seed = static_cast<std::uint32_t>(s);
  }
  tex.frequency = r.number_or("frequency", tex.frequency);
  tex.contrast = r.number_or("contrast", tex.contrast);
  tex.stripes = r.number_or("stripes", tex.stripes);
  if (r.has("tint")) tex.tint = r.vec("tint");
  if (tex.frequency <= 0.0) throw SceneParseError(line_no, "frequency must be positive");
  if (tex.contrast < 0.0) throw SceneParseError(line_no, "contrast must be non-negative");
  if (tex.stripes < 0.0 || tex.stripes > 1.0) throw SceneParseError(line_no, "stripes must be in [0, 1]");
  return tex;
}

void expect_positional(const Tokens& t, std::size_t n, int line_no) {
  if (t.positional.size() != n) {
    throw SceneParseError(line_no, "'" + t.directive + "' takes " + std::to_string(n) +
                                       " values, got " + std::to_string(t.positional.size()));
  }
}

struct CameraSpec {
  Vec3 position;
  Vec3 target;
  Vec3 down;
  int line;
};

}  // namespace

CameraModel look_at_camera(const Eigen::Matrix3d& K, const Vec3& position, const Vec3& target,
                           const Vec3& down, double depth_min, double depth_max) {
  const Vec3 forward = (target - position).normalized();
  const Vec3 right = down.cross(forward);
  if (right.norm() < 1e-9) throw std::invalid_argument("camera 'down' is parallel to the view direction");
  CameraModel cam;
  cam.K = K;
  cam.R.row(0) = right.normalized();
  cam.R.row(2) = forward;
  cam.R.row(1) = forward.cross(cam.R.row(0).transpose());
  cam.t = -cam.R * position;
  cam.depth_min = depth_min;
  cam.depth_max = depth_max;
  return cam;
}

SyntheticScene parse_scene(std::istream& in) {
  SyntheticScene scene;
  std::vector<CameraSpec> cams;
  bool have_intrinsics = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Tokens t = tokenize(line, line_no);
    KeyReader r(t, line_no);
    if (t.directive == "image") {
      expect_positional(t, 2, line_no);
      const double w = to_number(t.positional[0], line_no);
      const double h = to_number(t.positional[1], line_no);
      if (w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h) || w > 1 << 15 || h > 1 << 15) {
        throw SceneParseError(line_no, "image size must be positive integers");
      }
      scene.width = static_cast<int>(w);
      scene.height = static_cast<int>(h);
    } else if (t.directive == "intrinsics") {
      expect_positional(t, 4, line_no);
      double v[4];
      for (int i = 0; i < 4; ++i) v[i] = to_number(t.positional[i], line_no);
      if (v[0] <= 0 || v[1] <= 0) throw SceneParseError(line_no, "focal lengths must be positive");
      scene.K << v[0], 0, v[2], 0, v[1], v[3], 0, 0, 1;
      have_intrinsics = true;
    } else if (t.directive == "depth_range") {
      expect_positional(t, 2, line_no);
      scene.depth_min = to_number(t.positional[0], line_no);
      scene.depth_max = to_number(t.positional[1], line_no);
      if (!(scene.depth_min > 0 && scene.depth_max > scene.depth_min)) {
        throw SceneParseError(line_no, "depth range must satisfy 0 < min < max");
      }
    } else if (t.directive == "light") {
      expect_positional(t, 3, line_no);
      for (int i = 0; i < 3; ++i) scene.light_dir[i] = to_number(t.positional[i], line_no);
      if (scene.light_dir.norm() < 1e-12) throw SceneParseError(line_no, "light direction is zero");
      scene.ambient = r.number_or("ambient", scene.ambient);
      if (scene.ambient < 0 || scene.ambient > 1) throw SceneParseError(line_no, "ambient must be in [0, 1]");
    } else if (t.directive == "camera") {
      expect_positional(t, 0, line_no);
      CameraSpec c{r.vec("position"), r.vec("look_at"), Vec3(0, 1, 0), line_no};
      if (r.has("down")) c.down = r.vec("down");
      if ((c.target - c.position).norm() < 1e-9) throw SceneParseError(line_no, "camera looks at itself");
      cams.push_back(c);
    } else if (t.directive == "plane") {
      expect_positional(t, 0, line_no);
      Primitive p;
      p.kind = Primitive::Kind::plane;
      p.point = r.vec("point");
      p.normal = r.vec("normal");
      if (p.normal.norm() < 1e-12) throw SceneParseError(line_no, "plane normal is zero");
      p.normal.normalize();
      p.texture = read_texture(r, line_no);
      scene.primitives.push_back(p);
    } else if (t.directive == "sphere") {
      expect_positional(t, 0, line_no);
      Primitive p;
      p.kind = Primitive::Kind::sphere;
      p.point = r.vec("center");
      p.radius = r.number("radius");
      if (p.radius <= 0) throw SceneParseError(line_no, "sphere radius must be positive");
      p.texture = read_texture(r, line_no);
      scene.primitives.push_back(p);
    } else if (t.directive == "box") {
      expect_positional(t, 0, line_no);
      Primitive p;
      p.kind = Primitive::Kind::box;
      p.point = r.vec("center");
      p.half_extent = r.vec("half");
      if ((p.half_extent.array() <= 0).any()) throw SceneParseError(line_no, "box extents must be positive");
      p.texture = read_texture(r, line_no);
      scene.primitives.push_back(p);
    } else {
      throw SceneParseError(line_no, "unknown directive '" + t.directive + "'");
    }
    r.done();
  }
  if (!have_intrinsics) throw SceneParseError(line_no, "missing 'intrinsics'");
  if (cams.empty()) throw SceneParseError(line_no, "scene has no cameras");
  if (scene.primitives.empty()) throw SceneParseError(line_no, "scene has no primitives");
  for (const auto& c : cams) {
    try {
      scene.cameras.push_back(
          look_at_camera(scene.K, c.position, c.target, c.down, scene.depth_min, scene.depth_max));
    } catch (const std::invalid_argument& e) {
      throw SceneParseError(c.line, e.what());
    }
  }
  return scene;
}

SyntheticScene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file '" + path.string() + "'");
  return parse_scene(in);
}

bool intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir, double* t, Vec3* normal) {
  constexpr double kMinT = 1e-6;
  switch (prim.kind) {
    case Primitive::Kind::plane: {
      const double denom = prim.normal.dot(dir);
      if (std::abs(denom) < 1e-12) return false;
      const double hit = prim.normal.dot(prim.point - origin) / denom;
      if (hit <= kMinT) return false;
      *t = hit;
      *normal = prim.normal;
      return true;
    }
    case Primitive::Kind::sphere: {
      const Vec3 oc = origin - prim.point;
      const double a = dir.squaredNorm();
      const double b = oc.dot(dir);
      const double c = oc.squaredNorm() - prim.radius * prim.radius;
      const double disc = b * b - a * c;
      if (disc < 0) return false;
      const double sq = std::sqrt(disc);
      double hit = (-b - sq) / a;
      if (hit <= kMinT) hit = (-b + sq) / a;
      if (hit <= kMinT) return false;
      *t = hit;
      *normal = (origin + hit * dir - prim.point) / prim.radius;
      return true;
    }
    case Primitive::Kind::box: {
      const Vec3 lo = prim.point - prim.half_extent;
      const Vec3 hi = prim.point + prim.half_extent;
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      int axis_near = -1;
      int axis_far = -1;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-15) {
          if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
          continue;
        }
        double t0 = (lo[a] - origin[a]) / dir[a];
        double t1 = (hi[a] - origin[a]) / dir[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) {
          t_near = t0;
          axis_near = a;
        }
        if (t1 < t_far) {
          t_far = t1;
          axis_far = a;
        }
      }
      if (t_near > t_far || t_far <= kMinT) return false;
      const bool inside = t_near <= kMinT;
      const int axis = inside ? axis_far : axis_near;
      *t = inside ? t_far : t_near;
      Vec3 n = Vec3::Zero();
      n[axis] = dir[axis] > 0 ? -1.0 : 1.0;
      if (inside) n = -n;
      *normal = n;
      return true;
    }
  }
  return false;
}

namespace {

double lattice(std::int64_t x, std::int64_t y, std::int64_t z, std::uint32_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  h = splitmix64(h ^ static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Vec3& p, std::uint32_t seed) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
    acc += w * lattice(ix + dx, iy + dy, iz + dz, seed);
  }
  return acc;
}

}  // namespace

double texture_value(const Texture& tex, const Vec3& p) {
  constexpr int kOctaves = 5;
  constexpr double kBaseWavelength = 40.0;
  double sum = 0.0;
  double norm = 0.0;
  double amp = 1.0;
  double scale = tex.frequency / kBaseWavelength;
  for (int o = 0; o < kOctaves; ++o) {
    sum += amp * value_noise(p * scale, tex.seed + 977u * o);
    norm += amp;
    amp *= 0.7;
    scale *= 2.0;
  }
  const double noise = sum / norm;
  const double phase = tex.frequency * (0.7 * p.x() + 0.3 * p.y() + 0.2 * p.z()) / 12.0;
  const double stripe = 0.5 + 0.5 * std::sin(2.0 * M_PI * phase);
  const double v = (1.0 - tex.stripes) * noise + tex.stripes * stripe;
  return std::clamp(0.5 + 2.0 * tex.contrast * (v - 0.5), 0.03, 1.0);
}

RenderedView render(const SyntheticScene& scene, int view) {
  if (view < 0 || view >= static_cast<int>(scene.cameras.size())) {
    throw std::out_of_range("render: no camera " + std::to_string(view));
  }
  const CameraModel& cam = scene.cameras[view];
  const Eigen::Matrix3d Kinv = cam.K.inverse();
  const Eigen::Matrix3d Rt = cam.R.transpose();
  const Vec3 origin = cam.center();
  const Vec3 to_light = -scene.light_dir.normalized();
  RenderedView out{Grid(scene.width, scene.height, 3), Grid(scene.width, scene.height, 1),
                   ValidityMask(scene.width, scene.height)};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      // Camera-frame z of dir is 1, so the ray parameter is the depth.
      const Vec3 dir = Rt * (Kinv * Vec3(x, y, 1.0));
      double best = std::numeric_limits<double>::infinity();
      const Primitive* hit_prim = nullptr;
      Vec3 best_n;
      for (const auto& prim : scene.primitives) {
        double t;
        Vec3 n;
        if (intersect(prim, origin, dir, &t, &n) && t < best) {
          best = t;
          best_n = n;
          hit_prim = &prim;
        }
      }
      if (!hit_prim) continue;
      const Vec3 p = origin + best * dir;
      if (best_n.dot(dir) > 0) best_n = -best_n;
      const double shade = scene.ambient + (1.0 - scene.ambient) * std::max(0.0, best_n.dot(to_light));
      const double albedo = texture_value(hit_prim->texture, p);
      for (int c = 0; c < 3; ++c) {
        out.image.at(x, y, c) =
            static_cast<float>(std::clamp(albedo * hit_prim->texture.tint[c] * shade, 0.0, 1.0));
      }
      out.depth.at(x, y) = static_cast<float>(best);
      out.foreground.set(x, y, true);
    }
  }
  return out;
}

}  // namespace lpm
