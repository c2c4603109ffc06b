#include "lpm/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lpm {

namespace {
constexpr std::size_t kLeafSize = 8;
constexpr std::size_t kSpacingQueries = 100000;
}

KdTree::KdTree(std::span<const Eigen::Vector3f> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, points_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;
  Eigen::Vector3f lo = Eigen::Vector3f::Constant(std::numeric_limits<float>::infinity());
  Eigen::Vector3f hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const float split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(int id, const Eigen::Vector3f& q, std::size_t skip, std::size_t& best,
                    double& best_d2) const {
  const Node& n = nodes_[id];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      if (order_[i] == skip) continue;
      const double d2 = (points_[order_[i]] - q).cast<double>().squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && order_[i] < best)) {
        best_d2 = d2;
        best = order_[i];
      }
    }
    return;
  }
  const double diff = static_cast<double>(q[n.axis]) - n.split;
  const int first = diff < 0 ? n.left : n.right;
  const int second = diff < 0 ? n.right : n.left;
  search(first, q, skip, best, best_d2);
  if (diff * diff <= best_d2) search(second, q, skip, best, best_d2);
}

std::pair<std::size_t, double> KdTree::nearest(const Eigen::Vector3f& q) const {
  return nearest_excluding(q, std::numeric_limits<std::size_t>::max());
}

std::pair<std::size_t, double> KdTree::nearest_excluding(const Eigen::Vector3f& q,
                                                         std::size_t skip) const {
  if (points_.empty()) throw std::logic_error("KdTree::nearest on an empty tree");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, q, skip, best, best_d2);
  return {best, best_d2};
}

namespace {

double mean_capped_distance(const PointCloud& from, const KdTree& to, double cap) {
  double sum = 0.0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(from.size()); ++i) {
    sum += std::min(std::sqrt(to.nearest(from.points[i]).second), cap);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

CloudMetrics eval_clouds(const PointCloud& pred, const PointCloud& gt, double distance_cap) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("eval_clouds: empty point cloud");
  if (!(distance_cap > 0.0)) throw std::invalid_argument("eval_clouds: distance cap must be positive");
  const KdTree gt_tree(gt.points);
  const KdTree pred_tree(pred.points);
  CloudMetrics m;
  m.accuracy = mean_capped_distance(pred, gt_tree, distance_cap);
  m.completeness = mean_capped_distance(gt, pred_tree, distance_cap);
  m.overall = 0.5 * (m.accuracy + m.completeness);
  return m;
}

double median_spacing(const PointCloud& cloud) {
  if (cloud.size() < 2) throw std::invalid_argument("median_spacing: need at least two points");
  const KdTree tree(cloud.points);
  // Large clouds are queried at a fixed stride; the tree still holds every point.
  const std::size_t stride = (cloud.size() + kSpacingQueries - 1) / kSpacingQueries;
  std::vector<double> d((cloud.size() + stride - 1) / stride);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(d.size()); ++i) {
    const std::size_t q = static_cast<std::size_t>(i) * stride;
    d[i] = std::sqrt(tree.nearest_excluding(cloud.points[q], q).second);
  }
  std::erase_if(d, [](double v) { return !std::isfinite(v); });
  if (d.empty()) throw std::invalid_argument("median_spacing: points are too sparse to measure");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

double default_distance_cap(const PointCloud& gt) { return kDefaultCapFactor * median_spacing(gt); }

std::vector<double> error_cdf_abscissae() {
  std::vector<double> xs;
  for (int i = 1; i <= 50; ++i) xs.push_back(i / 100.0);
  return xs;
}

std::vector<std::pair<double, double>> error_cdf(const Grid& pred, const Grid& gt,
                                                 const DepthRange& range) {
  if (!pred.same_shape(gt) || pred.channels() != 1) throw ShapeError("error_cdf: grids differ");
  std::vector<double> errors;
  const double len = range.inverse_length();
  for (std::size_t i = 0; i < gt.data().size(); ++i) {
    const double g = gt.data()[i];
    const double p = pred.data()[i];
    if (!(g > 0.0) || !(p > 0.0)) continue;
    errors.push_back(std::abs(1.0 / p - 1.0 / g) / len);
  }
  std::sort(errors.begin(), errors.end());
  std::vector<std::pair<double, double>> cdf;
  for (double x : error_cdf_abscissae()) {
    const auto n = std::upper_bound(errors.begin(), errors.end(), x) - errors.begin();
    cdf.emplace_back(x, errors.empty() ? 0.0 : static_cast<double>(n) / errors.size());
  }
  return cdf;
}

PointCloud depth_to_cloud(const Grid& depth, const CameraModel& cam, const ValidityMask* mask) {
  PointCloud cloud;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const float d = depth.at(x, y);
      if (!(d > 0.0f) || (mask && !mask->get(x, y))) continue;
      cloud.points.push_back(backproject(cam, x, y, d).cast<float>());
      cloud.colors.push_back({0, 0, 0});
    }
  }
  return cloud;
}

}  // namespace lpm
