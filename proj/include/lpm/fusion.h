#pragma once

#include <span>
#include <vector>

#include "lpm/camera.h"
#include "lpm/grid.h"
#include "lpm/ply.h"

namespace lpm {

struct FilterParams {
  double conf_min = 0.3;
  double reproj_max = 1.0;           // pixels
  double relative_depth_max = 0.01;  // |d_back - d| / d
  int min_consistent_views = 2;

  void validate() const;
};

// mask(p) = confidence(p) >= conf_min.
ValidityMask photometric_filter(const Grid& depth, const Grid& confidence, double conf_min);

struct Correspondence {
  bool consistent = false;
  Eigen::Vector2d pixel;  // location in the other view
  double depth = 0.0;     // other view's depth brought back into this view
};

// Projects pixel (x, y) of view r at its depth into view s, reads s's depth
// there, back-projects it and reprojects into r. Consistent when the
// round-trip error is within reproj_max and the relative depth difference
// within relative_depth_max.
Correspondence check_consistency(int x, int y, double depth, const CameraModel& ref,
                                 const Grid& other_depth, const CameraModel& other,
                                 const FilterParams& params);

// Per view: pixels with positive depth consistent with at least
// min_consistent_views other views.
std::vector<ValidityMask> geometric_filter(std::span<const Grid> depths,
                                           std::span<const CameraModel> cameras,
                                           const FilterParams& params);

// Back-projects surviving pixels view by view in order. A pixel's consistent
// partners in later views are marked consumed so each surface point is
// emitted once; the emitted depth is the mean over the pixel and its partners
// in this view's frame, the color comes from this view.
PointCloud fuse(std::span<const Grid> depths, std::span<const ValidityMask> masks,
                std::span<const Grid> images, std::span<const CameraModel> cameras,
                const FilterParams& params);

}  // namespace lpm
