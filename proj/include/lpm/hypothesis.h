#pragma once

#include <string>
#include <vector>

#include "lpm/coefficients.h"
#include "lpm/grid.h"
#include "lpm/rng.h"
#include "lpm/volumes.h"

namespace lpm {

struct DepthRange {
  double min = 1.0;
  double max = 2.0;

  double inverse_near() const { return 1.0 / min; }
  double inverse_far() const { return 1.0 / max; }
  // Normalization length of the inverse-depth range.
  double inverse_length() const { return 1.0 / min - 1.0 / max; }
  float clamp(double d) const;
};

// Fraction of each stratification bin kept clear at both ends, so a sample
// converted to float depth and back never crosses into the neighboring bin.
inline constexpr double kBinMargin = 1e-4;

// D_f hypotheses per pixel, one uniform draw inside each of D_f equal bins of
// the inverse-depth range. Hypothesis j lies in bin j counted from the far end
// (increasing inverse depth).
HypothesisVolume init_random(int width, int height, const DepthRange& range, int count,
                             const RngKey& key);

// N hypotheses per pixel stratified over the inverse-depth window
// 1/prev +- range_fraction * L / 2 (L = inverse_length), clamped to the global
// range. Non-positive or non-finite previous depths center the window on the
// middle of the range.
HypothesisVolume perturb(const Grid& prev_depth, double range_fraction, int count,
                         const DepthRange& range, const RngKey& key);

// One hypothesis per offset: bilinear lookup of the previous depth map at
// p + base + delta. Lookups outside the map fall back to prev_depth(p).
HypothesisVolume propagate(const Grid& prev_depth, const OffsetField& offsets);

// Stacks the hypotheses of b after those of a.
HypothesisVolume concat(const HypothesisVolume& a, const HypothesisVolume& b);

enum class OffsetMode { fixed, feature_guided, coefficients };

// Grid patterns: 8 -> one ring {-1,0,1}^2 \ {0} at `dilation`;
// 16 -> that ring plus the same ring at 2 * dilation; 9 -> full 3x3 window
// including the center; 0 -> empty.
std::vector<Offset2> grid_pattern(int count, int dilation);

// Feature-guided snapping compares box-smoothed features, so fine texture
// averages out and what remains is the local appearance of the surface.
// Candidates within tie_tolerance of the best so far lose to the smaller move.
struct SnapParams {
  int smoothing_radius = 1;
  float tie_tolerance = 0.05f;
};

// Per-pixel sampling offsets around the fixed pattern.
//   fixed           deltas are zero
//   feature_guided  each base sample moves to the position in its 3x3
//                   neighborhood whose feature vector has the highest cosine
//                   similarity to the center pixel; ties keep the smaller move
//                   and ring samples never land on the center pixel
//   coefficients    3x3 convolution of the reference features with
//                   `<prefix>.stage<k>.{weight,bias}` emitting (dx, dy) pairs
OffsetField compute_offsets(const Grid& ref_features, int count, int dilation, OffsetMode mode,
                            const CoefficientSet* coefficients, const std::string& prefix,
                            int stage, const SnapParams& snap = {});

// Propagation pattern: count in {0, 8, 16}.
OffsetField propagation_offsets(const Grid& ref_features, int count, OffsetMode mode,
                                const CoefficientSet* coefficients = nullptr, int stage = 0,
                                int dilation = 2, const SnapParams& snap = {});

}  // namespace lpm
