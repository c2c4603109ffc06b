#pragma once

#include <array>

#include "lpm/coefficients.h"
#include "lpm/grid.h"

namespace lpm {

// Stage k in {1, 2, 3} holds features at W/2^k x H/2^k. The full-resolution
// input image is kept as guidance for refinement.
struct FeaturePyramid {
  Grid guidance;
  std::array<Grid, 3> stages;  // stages[k - 1]

  const Grid& stage(int k) const { return stages.at(k - 1); }
  Grid& stage(int k) { return stages.at(k - 1); }
};

enum class FeatureMode { handcrafted, coefficients };

inline constexpr int kHandcraftedChannels = 8;

// Handcrafted channels per stage, computed on the 2x2-mean-pooled intensity:
//   0  intensity
//   1  horizontal central difference
//   2  vertical central difference
//   3-7 3x3 census-like differences I(p + o) - mean3x3(p) for
//       o in {(-1,-1), (1,-1), (-1,1), (1,1), (0,0)}
// Borders replicate. Coefficient mode runs the version 1 "fpn." graph.
// Image dimensions must be divisible by 8.
FeaturePyramid extract_pyramid(const Grid& image, FeatureMode mode,
                               const CoefficientSet* coefficients = nullptr);

Grid handcrafted_features(const Grid& intensity);

// Per-channel standardization followed by per-pixel L2 normalization to
// sqrt(C * sharpness). The group correlation of two such vectors averaged over
// groups then equals sharpness * cosine similarity.
Grid normalize_for_matching(const Grid& features, float sharpness);

}  // namespace lpm
