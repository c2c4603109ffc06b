#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpm/camera.h"
#include "lpm/grid.h"

namespace lpm {

// Procedural solid texture: fractal value noise blended with stripes.
struct Texture {
  std::uint32_t seed = 1;
  double frequency = 1.0;  // features per ~40 scene units at 1.0
  double contrast = 1.0;
  double stripes = 0.0;    // blend weight of the stripe pattern
  Eigen::Vector3d tint{1.0, 1.0, 1.0};
};

struct Primitive {
  enum class Kind { plane, sphere, box } kind = Kind::plane;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();   // plane point or center
  Eigen::Vector3d normal{0.0, 0.0, -1.0};            // plane only
  double radius = 1.0;                               // sphere only
  Eigen::Vector3d half_extent{1.0, 1.0, 1.0};        // axis-aligned box only
  Texture texture;
};

struct SyntheticScene {
  int width = 640;
  int height = 480;
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  double depth_min = 425.0;
  double depth_max = 935.0;
  std::vector<CameraModel> cameras;
  std::vector<Primitive> primitives;
  Eigen::Vector3d light_dir{-0.3, -0.4, 1.0};  // direction the light travels
  double ambient = 0.35;
};

class SceneParseError : public std::runtime_error {
 public:
  SceneParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Line-oriented text format; '#' starts a comment. Directives:
//   image W H
//   intrinsics fx fy cx cy
//   depth_range MIN MAX
//   light dx dy dz [ambient=A]
//   camera position=x,y,z look_at=x,y,z [down=x,y,z]
//   plane point=x,y,z normal=x,y,z [texture keys]
//   sphere center=x,y,z radius=r [texture keys]
//   box center=x,y,z half=hx,hy,hz [texture keys]
// Texture keys: seed=N frequency=F contrast=C stripes=S tint=r,g,b.
// Cameras look along +z of their frame with image y pointing along `down`
// (default world +y).
SyntheticScene parse_scene(std::istream& in);
SyntheticScene load_scene(const std::filesystem::path& path);

struct RenderedView {
  Grid image;              // 3 channels in [0, 1]
  Grid depth;              // camera-frame z, 0 on background
  ValidityMask foreground;
};

RenderedView render(const SyntheticScene& scene, int view);

// Nearest hit along the ray; returns false when nothing is hit.
bool intersect(const Primitive& prim, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
               double* t, Eigen::Vector3d* normal);

double texture_value(const Texture& tex, const Eigen::Vector3d& p);

// World-to-camera pose for a camera at `position` looking at `target`.
CameraModel look_at_camera(const Eigen::Matrix3d& K, const Eigen::Vector3d& position,
                           const Eigen::Vector3d& target, const Eigen::Vector3d& down,
                           double depth_min, double depth_max);

}  // namespace lpm
