#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "lpm/grid.h"
#include "lpm/volumes.h"

namespace lpm {

// Pinhole camera. R, t map world coordinates into the camera frame
// (x_cam = R * x_world + t).
struct CameraModel {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double depth_min = 1.0;
  double depth_max = 2.0;

  Eigen::Vector3d center() const { return -R.transpose() * t; }

  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;

  // Intrinsics for a pyramid level that is 2^level smaller. Level pixel u
  // covers full-resolution pixels [2^level u, 2^level (u+1)), so its center is
  // at 2^level u + (2^level - 1) / 2.
  CameraModel scaled_to_level(int level) const;
};

struct RelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  RelativePose inverse() const { return {R.transpose(), -R.transpose() * t}; }
};

// Reference-camera coordinates -> source-camera coordinates.
RelativePose relative_pose(const CameraModel& ref, const CameraModel& src);

struct WarpResult {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double z_src = 0.0;
  bool valid = false;
};

inline constexpr double kBehindCameraEpsilon = 1e-6;

// Plane-sweep reprojection of reference pixel p at depth d into the source:
// K_src * (R * (K_ref^-1 * [p,1] * d) + t), dehomogenized.
WarpResult warp_pixel(const Eigen::Vector2d& p, double depth, const Eigen::Matrix3d& K_ref,
                      const RelativePose& rel, const Eigen::Matrix3d& K_src);

// Precomputed form of warp_pixel for a fixed view pair:
// x_src = depth * (M * [p,1]) + v.
struct WarpOperator {
  Eigen::Matrix3d M;
  Eigen::Vector3d v;

  WarpOperator(const Eigen::Matrix3d& K_ref, const RelativePose& rel,
               const Eigen::Matrix3d& K_src);
  WarpResult operator()(double px, double py, double depth) const;
};

// For every reference pixel and hypothesis, bilinear lookup of the source
// features at the warped location. The mask is false where the warp lands
// behind the source camera or outside the source grid.
WarpedVolume warp_feature_map(const Grid& source_features, const HypothesisVolume& hyp,
                              const Eigen::Matrix3d& K_ref, const RelativePose& rel,
                              const Eigen::Matrix3d& K_src);

// Back-projection into world coordinates.
Eigen::Vector3d backproject(const CameraModel& cam, double x, double y, double depth);
// Projection of a world point; returns pixel and camera-frame depth.
WarpResult project(const CameraModel& cam, const Eigen::Vector3d& world);

class CameraFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// MVSNet-style camera text file:
//   extrinsic / 4x4 row-major world-to-camera
//   intrinsic / 3x3 row-major
//   depth_min depth_interval [depth_max | num_depths depth_max]
// With only two values depth_max = depth_min + 192 * depth_interval.
CameraModel read_camera_file(const std::filesystem::path& path);
void write_camera_file(const std::filesystem::path& path, const CameraModel& cam);

}  // namespace lpm
