#include "lpm/camera.h"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace lpm {

void CameraModel::validate() const {
  const double orth = (R * R.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (orth > 1e-5 || std::abs(R.determinant() - 1.0) > 1e-5) {
    throw std::invalid_argument("camera rotation is not a proper rotation");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
    throw std::invalid_argument("intrinsic matrix must be upper triangular with K(2,2)=1");
  }
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
    throw std::invalid_argument("focal lengths must be positive");
  }
  if (!(depth_min > 0.0) || !(depth_min < depth_max)) {
    throw std::invalid_argument("depth range must satisfy 0 < depth_min < depth_max");
  }
}

CameraModel CameraModel::scaled_to_level(int level) const {
  CameraModel c = *this;
  const double s = std::ldexp(1.0, -level);
  c.K(0, 0) *= s;
  c.K(0, 1) *= s;
  c.K(1, 1) *= s;
  c.K(0, 2) = (K(0, 2) + 0.5) * s - 0.5;
  c.K(1, 2) = (K(1, 2) + 0.5) * s - 0.5;
  return c;
}

RelativePose relative_pose(const CameraModel& ref, const CameraModel& src) {
  RelativePose rel;
  rel.R = src.R * ref.R.transpose();
  rel.t = src.t - rel.R * ref.t;
  return rel;
}

WarpResult warp_pixel(const Eigen::Vector2d& p, double depth, const Eigen::Matrix3d& K_ref,
                      const RelativePose& rel, const Eigen::Matrix3d& K_src) {
  const Eigen::Vector3d ray = K_ref.inverse() * Eigen::Vector3d(p.x(), p.y(), 1.0);
  const Eigen::Vector3d x = K_src * (rel.R * (ray * depth) + rel.t);
  WarpResult r;
  r.z_src = x.z();
  r.valid = x.z() > kBehindCameraEpsilon;
  if (r.valid) r.pixel = Eigen::Vector2d(x.x() / x.z(), x.y() / x.z());
  return r;
}

WarpOperator::WarpOperator(const Eigen::Matrix3d& K_ref, const RelativePose& rel,
                           const Eigen::Matrix3d& K_src)
    : M(K_src * rel.R * K_ref.inverse()), v(K_src * rel.t) {}

WarpResult WarpOperator::operator()(double px, double py, double depth) const {
  const Eigen::Vector3d x = depth * (M * Eigen::Vector3d(px, py, 1.0)) + v;
  WarpResult r;
  r.z_src = x.z();
  r.valid = x.z() > kBehindCameraEpsilon;
  if (r.valid) r.pixel = Eigen::Vector2d(x.x() / x.z(), x.y() / x.z());
  return r;
}

WarpedVolume warp_feature_map(const Grid& source_features, const HypothesisVolume& hyp,
                              const Eigen::Matrix3d& K_ref, const RelativePose& rel,
                              const Eigen::Matrix3d& K_src) {
  if (source_features.empty() || hyp.depths.empty()) {
    throw ShapeError("warp_feature_map: empty input");
  }
  WarpedVolume out;
  out.width = hyp.width();
  out.height = hyp.height();
  out.depth = hyp.count();
  out.channels = source_features.channels();
  out.values.assign(static_cast<std::size_t>(out.width) * out.height * out.depth * out.channels,
                    0.0f);
  out.valid.assign(static_cast<std::size_t>(out.width) * out.height * out.depth, 0);
  const WarpOperator warp(K_ref, rel, K_src);
  const int C = out.channels;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const auto depths = hyp.depths.pixel(x, y);
      for (int j = 0; j < out.depth; ++j) {
        const std::size_t cell = out.cell(x, y, j);
        std::span<float> dst(out.values.data() + cell * C, static_cast<std::size_t>(C));
        const WarpResult w = warp(x, y, depths[j]);
        if (!w.valid) continue;
        const bool ok = bilinear_sample_into(source_features, w.pixel.x(), w.pixel.y(), dst);
        if (ok) {
          out.valid[cell] = 1;
        } else {
          std::fill(dst.begin(), dst.end(), 0.0f);
        }
      }
    }
  }
  return out;
}

Eigen::Vector3d backproject(const CameraModel& cam, double x, double y, double depth) {
  const Eigen::Vector3d cam_pt = cam.K.inverse() * Eigen::Vector3d(x, y, 1.0) * depth;
  return cam.R.transpose() * (cam_pt - cam.t);
}

WarpResult project(const CameraModel& cam, const Eigen::Vector3d& world) {
  const Eigen::Vector3d c = cam.R * world + cam.t;
  WarpResult r;
  r.z_src = c.z();
  r.valid = c.z() > kBehindCameraEpsilon;
  if (r.valid) {
    const Eigen::Vector3d h = cam.K * c;
    r.pixel = Eigen::Vector2d(h.x() / h.z(), h.y() / h.z());
  }
  return r;
}

namespace {

std::vector<double> read_numbers(std::istream& in, int n, const std::string& what,
                                 const std::filesystem::path& path) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    if (!(in >> v[i])) {
      throw CameraFileError("camera file '" + path.string() + "': truncated " + what);
    }
  }
  return v;
}

void expect_keyword(std::istream& in, const std::string& kw, const std::filesystem::path& path) {
  std::string tok;
  if (!(in >> tok) || tok != kw) {
    throw CameraFileError("camera file '" + path.string() + "': expected '" + kw + "'");
  }
}

}  // namespace

CameraModel read_camera_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CameraFileError("cannot open camera file '" + path.string() + "'");
  CameraModel cam;
  expect_keyword(in, "extrinsic", path);
  const auto e = read_numbers(in, 16, "extrinsic", path);
  expect_keyword(in, "intrinsic", path);
  const auto k = read_numbers(in, 9, "intrinsic", path);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      cam.R(r, c) = e[r * 4 + c];
      cam.K(r, c) = k[r * 3 + c];
    }
    cam.t(r) = e[r * 4 + 3];
  }

  // The depth line has 2, 3 or 4 values; anything after it is ignored.
  std::string line;
  std::vector<double> depth_values;
  while (depth_values.empty() && std::getline(in, line)) {
    std::istringstream ls(line);
    double v;
    while (ls >> v) depth_values.push_back(v);
  }
  if (depth_values.size() < 2) {
    throw CameraFileError("camera file '" + path.string() + "': missing depth range line");
  }
  cam.depth_min = depth_values[0];
  if (depth_values.size() == 2) {
    cam.depth_max = depth_values[0] + 192.0 * depth_values[1];
  } else if (depth_values.size() == 3) {
    cam.depth_max = depth_values[2];
  } else {
    cam.depth_max = depth_values[3];
  }
  try {
    cam.validate();
  } catch (const std::invalid_argument& ex) {
    throw CameraFileError("camera file '" + path.string() + "': " + ex.what());
  }
  return cam;
}

void write_camera_file(const std::filesystem::path& path, const CameraModel& cam) {
  std::ofstream out(path);
  if (!out) throw CameraFileError("cannot write camera file '" + path.string() + "'");
  out << std::setprecision(17);
  out << "extrinsic\n";
  for (int r = 0; r < 3; ++r) {
    out << cam.R(r, 0) << ' ' << cam.R(r, 1) << ' ' << cam.R(r, 2) << ' ' << cam.t(r) << '\n';
  }
  out << "0 0 0 1\n\nintrinsic\n";
  for (int r = 0; r < 3; ++r) {
    out << cam.K(r, 0) << ' ' << cam.K(r, 1) << ' ' << cam.K(r, 2) << '\n';
  }
  out << '\n'
      << cam.depth_min << ' ' << (cam.depth_max - cam.depth_min) / 192.0 << ' ' << cam.depth_max
      << '\n';
}

}  // namespace lpm
