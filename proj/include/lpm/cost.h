#pragma once

#include <span>
#include <string>
#include <vector>

#include "lpm/coefficients.h"
#include "lpm/conv.h"
#include "lpm/grid.h"
#include "lpm/hypothesis.h"
#include "lpm/volumes.h"

namespace lpm {

// Per-element channel MLP over the G group similarities. Built from one of the
// "viewweight.", "score." or "spatialweight." groups of a coefficient set; the
// pointers stay valid as long as the set does.
struct PointwiseNet {
  std::vector<DenseLayer> layers;

  bool empty() const { return layers.empty(); }
  int input_size() const { return layers.empty() ? 0 : layers.front().weight->shape[1]; }
  float operator()(std::span<const float> input, std::vector<float>& a,
                   std::vector<float>& b) const {
    return run_pointwise_mlp(layers, input, a, b);
  }

  static PointwiseNet view_weight(const CoefficientSet& set);
  static PointwiseNet score(const CoefficientSet& set);
  static PointwiseNet spatial_weight(const CoefficientSet& set);
};

// S^g(p, j) = (G / C) * <F0(p)^g, Fi(p_ij)^g>; masked cells are zero.
SimilarityVolume group_similarity(const Grid& ref_features, const WarpedVolume& warped,
                                  int groups);

// w(p) = max_j P(p, j) with P = logistic(mean_g S) or the view-weight net.
Grid view_weight(const SimilarityVolume& s, const PointwiseNet* net = nullptr);

inline constexpr double kViewWeightEpsilon = 1e-6;

// Weighted mean of the per-view similarities. A view only contributes to a
// cell where its warp was valid, so views that do not see p do not drag the
// average toward zero:
//   S(p, j) = sum_i w_i v_ij S_i / (sum_i w_i v_ij + eps)
// The output cell is valid if any view was.
SimilarityVolume aggregate_views(std::span<const SimilarityVolume> views,
                                 std::span<const Grid> weights,
                                 double eps = kViewWeightEpsilon);

// score(p, j) = mean_g S(p, j) or the score net.
CostVolume similarity_to_score(const SimilarityVolume& s, const PointwiseNet* net = nullptr);

// Evaluation pattern: 3x3 grid (count 9) at the given dilation.
OffsetField eval_offsets(const Grid& ref_features, int count, OffsetMode mode,
                         const CoefficientSet* coefficients = nullptr, int stage = 0,
                         int dilation = 1, const SnapParams& snap = {});

struct SpatialWeightParams {
  double sigma_d = 2.0;
  double beta = 10.0;
  int groups = 4;
};

struct SpatialWeights {
  int width = 0;
  int height = 0;
  int samples = 0;
  int depth = 0;
  std::vector<float> feature;       // w_k, [y][x][k]; zero at invalid samples
  std::vector<float> depth_weight;  // d_k, [y][x][k][j]
  std::vector<std::uint8_t> valid;  // [y][x][k]

  std::size_t sample_index(int x, int y, int k) const {
    return (static_cast<std::size_t>(y) * width + x) * samples + k;
  }
};

// w_k(p) = logistic(mean_g groupcorr(F0(q_k), F0(p))) or the spatial-weight net,
// d_k(p, j) = logistic(sigma_d - beta * |1/d_j(q_k) - 1/d_j(p)| / L),
// with q_k = p + p_k + dp_k and d_j(q_k) read bilinearly from slice j.
SpatialWeights spatial_weights(const Grid& ref_features, const OffsetField& offsets,
                               const HypothesisVolume& hyp, const DepthRange& range,
                               const SpatialWeightParams& params,
                               const PointwiseNet* net = nullptr);

// C(p, j) = sum_k w_k d_kj score(q_k, j) / sum_k w_k d_kj, scores sampled
// bilinearly; invalid samples are dropped and a zero denominator falls back to
// score(p, j).
CostVolume aggregate_spatial(const CostVolume& score, const OffsetField& offsets,
                             const SpatialWeights& weights);

struct Regression {
  Grid depth;
  ProbabilityVolume prob;
};

// Softmax over hypotheses of score / temperature.
ProbabilityVolume softmax_scores(const CostVolume& score, double temperature = 1.0);

// Expectation of depth under the softmax, clamped to the per-pixel hypothesis
// span against rounding.
Regression regress_depth(const CostVolume& score, const HypothesisVolume& hyp,
                         double temperature = 1.0);

// (sum_j P_j / d_j)^-1.
Grid regress_inverse_depth(const ProbabilityVolume& prob, const HypothesisVolume& hyp);

// Probability mass of the four hypotheses nearest to depth(p) in inverse depth.
Grid confidence(const ProbabilityVolume& prob, const HypothesisVolume& hyp, const Grid& depth);

}  // namespace lpm
