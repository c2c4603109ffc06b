#include "lpm/fusion.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpm {

void FilterParams::validate() const {
  if (conf_min < 0.0) throw std::invalid_argument("conf_min must be non-negative");
  if (!(reproj_max > 0.0)) throw std::invalid_argument("reproj_max must be positive");
  if (!(relative_depth_max > 0.0)) throw std::invalid_argument("relative_depth_max must be positive");
  if (min_consistent_views < 0) throw std::invalid_argument("min_consistent_views must be non-negative");
}

ValidityMask photometric_filter(const Grid& depth, const Grid& confidence, double conf_min) {
  if (!depth.same_size(confidence)) throw ShapeError("photometric_filter: size mismatch");
  ValidityMask mask(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) mask.set(x, y, confidence.at(x, y) >= conf_min);
  }
  return mask;
}

Correspondence check_consistency(int x, int y, double depth, const CameraModel& ref,
                                 const Grid& other_depth, const CameraModel& other,
                                 const FilterParams& params) {
  Correspondence c;
  if (!(depth > 0.0)) return c;
  const Eigen::Vector3d world = backproject(ref, x, y, depth);
  const WarpResult into = project(other, world);
  if (!into.valid) return c;
  bool inside = false;
  const double d_other = bilinear_sample_scalar(other_depth, into.pixel.x(), into.pixel.y(), &inside);
  if (!inside || !(d_other > 0.0)) return c;
  const Eigen::Vector3d back = backproject(other, into.pixel.x(), into.pixel.y(), d_other);
  const WarpResult home = project(ref, back);
  if (!home.valid) return c;
  c.pixel = into.pixel;
  c.depth = home.z_src;
  const double reproj = (home.pixel - Eigen::Vector2d(x, y)).norm();
  const double rel = std::abs(home.z_src - depth) / depth;
  c.consistent = reproj <= params.reproj_max && rel <= params.relative_depth_max;
  return c;
}

namespace {

void check_views(std::span<const Grid> depths, std::span<const CameraModel> cameras) {
  if (depths.size() != cameras.size()) {
    throw std::invalid_argument("one camera per depth map required");
  }
  for (const Grid& d : depths) {
    if (d.channels() != 1) throw ShapeError("depth maps must be single-channel");
  }
}

}  // namespace

std::vector<ValidityMask> geometric_filter(std::span<const Grid> depths,
                                           std::span<const CameraModel> cameras,
                                           const FilterParams& params) {
  params.validate();
  check_views(depths, cameras);
  const int n = static_cast<int>(depths.size());
  std::vector<ValidityMask> masks;
  for (int r = 0; r < n; ++r) {
    const Grid& d = depths[r];
    ValidityMask mask(d.width(), d.height());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < d.height(); ++y) {
      for (int x = 0; x < d.width(); ++x) {
        const double depth = d.at(x, y);
        if (!(depth > 0.0)) continue;
        int agree = 0;
        for (int s = 0; s < n; ++s) {
          if (s == r) continue;
          if (check_consistency(x, y, depth, cameras[r], depths[s], cameras[s], params).consistent) {
            ++agree;
          }
        }
        mask.set(x, y, agree >= params.min_consistent_views);
      }
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

PointCloud fuse(std::span<const Grid> depths, std::span<const ValidityMask> masks,
                std::span<const Grid> images, std::span<const CameraModel> cameras,
                const FilterParams& params) {
  check_views(depths, cameras);
  if (masks.size() != depths.size() || images.size() != depths.size()) {
    throw std::invalid_argument("fuse: one mask and image per depth map required");
  }
  const int n = static_cast<int>(depths.size());
  std::vector<std::vector<std::uint8_t>> consumed(n);
  for (int v = 0; v < n; ++v) {
    if (masks[v].width() != depths[v].width() || masks[v].height() != depths[v].height() ||
        !images[v].same_size(depths[v])) {
      throw ShapeError("fuse: view " + std::to_string(v) + " has mismatched mask or image");
    }
    consumed[v].assign(depths[v].pixel_count(), 0);
  }

  PointCloud cloud;
  for (int r = 0; r < n; ++r) {
    const Grid& d = depths[r];
    const Grid& img = images[r];
    for (int y = 0; y < d.height(); ++y) {
      for (int x = 0; x < d.width(); ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * d.width() + x;
        const double depth = d.at(x, y);
        if (!masks[r].get(x, y) || consumed[r][idx] || !(depth > 0.0)) continue;
        double sum = depth;
        int support = 1;
        for (int s = 0; s < n; ++s) {
          if (s == r) continue;
          const Correspondence c =
              check_consistency(x, y, depth, cameras[r], depths[s], cameras[s], params);
          if (!c.consistent) continue;
          sum += c.depth;
          ++support;
          const int qx = static_cast<int>(std::lround(c.pixel.x()));
          const int qy = static_cast<int>(std::lround(c.pixel.y()));
          if (qx >= 0 && qy >= 0 && qx < depths[s].width() && qy < depths[s].height() &&
              masks[s].get(qx, qy)) {
            consumed[s][static_cast<std::size_t>(qy) * depths[s].width() + qx] = 1;
          }
        }
        const Eigen::Vector3d p = backproject(cameras[r], x, y, sum / support);
        cloud.points.push_back(p.cast<float>());
        std::array<std::uint8_t, 3> rgb{};
        for (int c = 0; c < 3; ++c) {
          const float v = img.at(x, y, img.channels() == 3 ? c : 0);
          rgb[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
        cloud.colors.push_back(rgb);
        cloud.support.push_back(support);
      }
    }
  }
  return cloud;
}

}  // namespace lpm
