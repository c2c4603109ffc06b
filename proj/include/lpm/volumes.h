#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lpm/grid.h"

namespace lpm {

// Per-pixel depth candidates. Stored as a grid with one channel per hypothesis
// so a slice j at a fractional location is a plain bilinear lookup.
struct HypothesisVolume {
  Grid depths;

  int width() const { return depths.width(); }
  int height() const { return depths.height(); }
  int count() const { return depths.channels(); }
  std::size_t storage_bytes() const { return depths.data().size() * sizeof(float); }
};

struct Offset2 {
  float dx = 0.0f;
  float dy = 0.0f;
  friend bool operator==(const Offset2&, const Offset2&) = default;
};

// Fixed grid pattern plus per-pixel displacements; pixel p samples at
// p + base[k] + delta(p, k).
struct OffsetField {
  int width = 0;
  int height = 0;
  std::vector<Offset2> base;
  std::vector<Offset2> deltas;  // [y][x][k]

  int count() const { return static_cast<int>(base.size()); }
  const Offset2& delta(int x, int y, int k) const {
    return deltas[(static_cast<std::size_t>(y) * width + x) * base.size() + k];
  }
  Offset2& delta(int x, int y, int k) {
    return deltas[(static_cast<std::size_t>(y) * width + x) * base.size() + k];
  }
};

// Source features warped onto the reference grid for every hypothesis.
struct WarpedVolume {
  int width = 0;
  int height = 0;
  int depth = 0;
  int channels = 0;
  std::vector<float> values;       // [y][x][j][c]
  std::vector<std::uint8_t> valid;  // [y][x][j]

  std::size_t cell(int x, int y, int j) const {
    return (static_cast<std::size_t>(y) * width + x) * depth + j;
  }
};

// Group-wise correlation per pixel and hypothesis. Invalid cells hold zeros.
struct SimilarityVolume {
  int width = 0;
  int height = 0;
  int depth = 0;
  int groups = 0;
  std::vector<float> values;       // [y][x][j][g]
  std::vector<std::uint8_t> valid;  // [y][x][j]

  std::size_t cell(int x, int y, int j) const {
    return (static_cast<std::size_t>(y) * width + x) * depth + j;
  }
  const float* groups_at(int x, int y, int j) const {
    return values.data() + cell(x, y, j) * groups;
  }
  float* groups_at(int x, int y, int j) {
    return values.data() + cell(x, y, j) * groups;
  }
};

// Matching score per pixel and hypothesis, one channel per hypothesis.
// Higher is better (negated matching cost).
using CostVolume = Grid;

// Softmax over hypotheses, one channel per hypothesis.
using ProbabilityVolume = Grid;

}  // namespace lpm
