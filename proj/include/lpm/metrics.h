#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "lpm/camera.h"
#include "lpm/grid.h"
#include "lpm/hypothesis.h"
#include "lpm/ply.h"

namespace lpm {

// Static 3D kd-tree for nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3f> points);

  // Index of the nearest point and its squared distance.
  std::pair<std::size_t, double> nearest(const Eigen::Vector3f& q) const;
  // Same, ignoring the point with index `skip`.
  std::pair<std::size_t, double> nearest_excluding(const Eigen::Vector3f& q, std::size_t skip) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    int axis = -1;           // -1 for leaves
    float split = 0.0f;
    int left = -1, right = -1;
  };
  int build(std::size_t begin, std::size_t end);
  void search(int node, const Eigen::Vector3f& q, std::size_t skip, std::size_t& best,
              double& best_d2) const;

  std::vector<Eigen::Vector3f> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

struct CloudMetrics {
  double accuracy = 0.0;
  double completeness = 0.0;
  double overall = 0.0;
};

// Mean capped nearest-neighbor distances pred -> gt (accuracy) and
// gt -> pred (completeness); overall is their mean.
CloudMetrics eval_clouds(const PointCloud& pred, const PointCloud& gt, double distance_cap);

// Median nearest-neighbor distance within the cloud, over at most 100000
// evenly strided query points.
double median_spacing(const PointCloud& cloud);

inline constexpr double kDefaultCapFactor = 20.0;

// distance_cap = kDefaultCapFactor * median_spacing(gt).
double default_distance_cap(const PointCloud& gt);

// Abscissae 0.01, 0.02, ..., 0.50.
std::vector<double> error_cdf_abscissae();

// Fraction of pixels (gt > 0 and pred > 0) whose normalized inverse-depth
// error |1/pred - 1/gt| / L falls at or below each abscissa.
std::vector<std::pair<double, double>> error_cdf(const Grid& pred, const Grid& gt,
                                                 const DepthRange& range);

// Back-projects every pixel with positive depth (and mask set, if given).
PointCloud depth_to_cloud(const Grid& depth, const CameraModel& cam,
                          const ValidityMask* mask = nullptr);

}  // namespace lpm
