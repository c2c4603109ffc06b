#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lpm/hypothesis.h"
#include "test_util.h"

using namespace lpm;

namespace {

int inverse_bin(float depth, double lo, double hi, int count) {
  return static_cast<int>(std::floor((1.0 / depth - lo) / ((hi - lo) / count)));
}

// Two regions split by a vertical edge between columns edge-1 and edge.
Grid two_region_features(int w, int h, int edge) {
  Grid f(w, h, 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool left = x < edge;
      f.at(x, y, 0) = left ? 1.0f : 0.0f;
      f.at(x, y, 1) = left ? 0.5f : 0.0f;
      f.at(x, y, 2) = left ? 0.0f : 1.0f;
      f.at(x, y, 3) = left ? 0.0f : -0.5f;
    }
  }
  return f;
}

double cosine(const Grid& f, int x0, int y0, int x1, int y1) {
  double ab = 0, aa = 0, bb = 0;
  for (int c = 0; c < f.channels(); ++c) {
    ab += f.at(x0, y0, c) * f.at(x1, y1, c);
    aa += f.at(x0, y0, c) * f.at(x0, y0, c);
    bb += f.at(x1, y1, c) * f.at(x1, y1, c);
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST(InitRandom, OneSamplePerBinExhaustive) {
  const DepthRange range{425.0, 935.0};
  for (int count : {1, 2, 8, 48}) {
    const HypothesisVolume hyp = init_random(64, 64, range, count, {7, 3, 0});
    ASSERT_EQ(hyp.count(), count);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        std::vector<int> hits(count, 0);
        for (int j = 0; j < count; ++j) {
          const float d = hyp.depths.at(x, y, j);
          ASSERT_GE(d, range.min);
          ASSERT_LE(d, range.max);
          const int b = inverse_bin(d, range.inverse_far(), range.inverse_near(), count);
          ASSERT_GE(b, 0);
          ASSERT_LT(b, count);
          ++hits[b];
        }
        for (int b = 0; b < count; ++b) ASSERT_EQ(hits[b], 1) << "count " << count << " bin " << b;
      }
    }
  }
}

TEST(InitRandom, TwoBinsOverInverseHalfToOne) {
  const HypothesisVolume hyp = init_random(16, 16, {1.0, 2.0}, 2, {1, 3, 0});
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double a = 1.0 / hyp.depths.at(x, y, 0), b = 1.0 / hyp.depths.at(x, y, 1);
      EXPECT_GE(a, 0.5);
      EXPECT_LT(a, 0.75);
      EXPECT_GE(b, 0.75);
      EXPECT_LE(b, 1.0);
    }
  }
}

TEST(InitRandom, DeterministicAndKeyed) {
  const DepthRange r{425, 935};
  const auto a = init_random(20, 10, r, 8, {5, 3, 0});
  const auto b = init_random(20, 10, r, 8, {5, 3, 0});
  const auto c = init_random(20, 10, r, 8, {6, 3, 0});
  EXPECT_EQ(a.depths.data(), b.depths.data());
  EXPECT_NE(a.depths.data(), c.depths.data());
  EXPECT_THROW(init_random(4, 4, {2, 1}, 8, {}), std::invalid_argument);
}

TEST(Perturb, ZeroRangeCollapsesToPrevious) {
  Grid prev(6, 4, 1, 600.0f);
  const auto hyp = perturb(prev, 0.0, 8, {425, 935}, {1, 2, 0});
  for (float d : hyp.depths.data()) EXPECT_NEAR(d, 600.0f, 1e-3);
}

TEST(Perturb, FullRangeFromCenterIsStratifiedOverRange) {
  const DepthRange r{425, 935};
  const double mid = 0.5 * (r.inverse_far() + r.inverse_near());
  Grid prev(8, 8, 1, static_cast<float>(1.0 / mid));
  const auto hyp = perturb(prev, 2.0, 8, r, {1, 2, 0});
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int j = 0; j < 8; ++j) {
        EXPECT_EQ(inverse_bin(hyp.depths.at(x, y, j), r.inverse_far(), r.inverse_near(), 8), j);
      }
    }
  }
}

TEST(Perturb, WindowWidthAndClamping) {
  const DepthRange r{425, 935};
  std::mt19937 rng(21);
  std::uniform_real_distribution<float> u(300.0f, 1200.0f);
  Grid prev(32, 32, 1);
  for (float& v : prev.data()) v = u(rng);
  prev.at(0, 0) = 0.0f;
  prev.at(1, 0) = std::nanf("");
  const double R = 0.38;
  const auto hyp = perturb(prev, R, 16, r, {3, 3, 1});
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const float d = prev.at(x, y);
      const double center = (d > 0 && std::isfinite(d)) ? std::clamp(1.0 / d, r.inverse_far(), r.inverse_near())
                                                         : 0.5 * (r.inverse_far() + r.inverse_near());
      for (int j = 0; j < 16; ++j) {
        const float h = hyp.depths.at(x, y, j);
        ASSERT_GE(h, r.min);
        ASSERT_LE(h, r.max);
        EXPECT_LE(std::abs(1.0 / h - center), R * r.inverse_length() / 2 + 1e-7);
      }
      for (int j = 1; j < 16; ++j) EXPECT_LT(hyp.depths.at(x, y, j), hyp.depths.at(x, y, j - 1));
    }
  }
}

TEST(GridPattern, DocumentedLayouts) {
  EXPECT_TRUE(grid_pattern(0, 2).empty());
  const auto p8 = grid_pattern(8, 2);
  ASSERT_EQ(p8.size(), 8u);
  for (const auto& o : p8) EXPECT_EQ(std::max(std::abs(o.dx), std::abs(o.dy)), 2.0f);
  const auto p16 = grid_pattern(16, 2);
  ASSERT_EQ(p16.size(), 16u);
  std::set<std::pair<float, float>> uniq;
  for (const auto& o : p16) uniq.insert({o.dx, o.dy});
  EXPECT_EQ(uniq.size(), 16u);
  for (int i = 8; i < 16; ++i) EXPECT_EQ(std::max(std::abs(p16[i].dx), std::abs(p16[i].dy)), 4.0f);
  const auto p9 = grid_pattern(9, 1);
  ASSERT_EQ(p9.size(), 9u);
  EXPECT_TRUE(std::any_of(p9.begin(), p9.end(), [](const Offset2& o) { return o == Offset2{}; }));
  EXPECT_THROW(grid_pattern(5, 1), std::invalid_argument);
  EXPECT_THROW(propagation_offsets(Grid(4, 4, 4), 9, OffsetMode::fixed), std::invalid_argument);
}

TEST(Offsets, FixedModeHasZeroDeltas) {
  std::mt19937 rng(22);
  const auto f = propagation_offsets(test::random_grid(10, 8, 4, rng), 16, OffsetMode::fixed);
  EXPECT_EQ(f.base, grid_pattern(16, 2));
  for (const auto& d : f.deltas) EXPECT_EQ(d, Offset2{});
}

TEST(Offsets, ConstantFeaturesKeepTheGrid) {
  // Away from the border every candidate ties, so nothing moves.
  const auto f = propagation_offsets(Grid(10, 10, 4, 1.0f), 8, OffsetMode::feature_guided);
  for (int y = 3; y < 7; ++y)
    for (int x = 3; x < 7; ++x)
      for (int k = 0; k < f.count(); ++k) EXPECT_EQ(f.delta(x, y, k), Offset2{});
}

TEST(Offsets, SnapBackAcrossVerticalEdge) {
  const int edge = 6;
  const Grid f = two_region_features(12, 9, edge);
  const SnapParams raw{0, 0.0f};
  const auto field = propagation_offsets(f, 8, OffsetMode::feature_guided, nullptr, 0, 1, raw);
  const int x = edge - 1, y = 4;  // center just left of the edge
  for (int i = 0; i < field.count(); ++i) {
    const int bx = x + static_cast<int>(field.base[i].dx), by = y + static_cast<int>(field.base[i].dy);
    const Offset2 d = field.delta(x, y, i);
    const int qx = bx + static_cast<int>(d.dx), qy = by + static_cast<int>(d.dy);
    // Enumerate the 3x3 window for the best cosine, excluding the center pixel itself.
    double best = -2;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int cx = bx + dx, cy = by + dy;
        if (cx == x && cy == y) continue;
        best = std::max(best, cosine(f, x, y, cx, cy));
      }
    EXPECT_NEAR(cosine(f, x, y, qx, qy), best, 1e-9);
    if (bx >= edge) {
      EXPECT_LT(qx, edge) << "sample " << i << " stayed right of the edge";
      EXPECT_LT(d.dx, 0.0f);
    } else {
      EXPECT_EQ(d, Offset2{}) << "sample " << i << " moved although already on the left";
    }
  }
}

TEST(Offsets, CoefficientModeReadsConvolution) {
  CoefficientSet set;
  Tensor w{{16, 4, 3, 3}, std::vector<float>(16 * 4 * 9, 0.0f)};
  Tensor b{{16}, std::vector<float>(16, 0.0f)};
  b.values[0] = 0.25f;   // dx of sample 0
  b.values[15] = -0.5f;  // dy of sample 7
  w.values[((2 * 3 + 1) * 4 + 0) * 9 + 4] = 1.0f;  // dy of sample 3 = feature channel 0
  set.add("prop.stage2.weight", w);
  set.add("prop.stage2.bias", b);
  Grid f(5, 5, 4, 0.0f);
  f.at(2, 2, 0) = 3.0f;
  const auto field = propagation_offsets(f, 8, OffsetMode::coefficients, &set, 2);
  EXPECT_FLOAT_EQ(field.delta(2, 2, 0).dx, 0.25f);
  EXPECT_FLOAT_EQ(field.delta(2, 2, 7).dy, -0.5f);
  EXPECT_FLOAT_EQ(field.delta(2, 2, 3).dy, 3.0f);
  EXPECT_FLOAT_EQ(field.delta(1, 2, 3).dy, 0.0f);
  EXPECT_THROW(propagation_offsets(f, 16, OffsetMode::coefficients, &set, 2), CoefficientError);
  EXPECT_THROW(propagation_offsets(f, 8, OffsetMode::coefficients, nullptr, 2), std::invalid_argument);
}

TEST(Propagate, ConstantMapIsConstantForAnyOffsets) {
  std::mt19937 rng(23);
  OffsetField field;
  field.width = 7;
  field.height = 5;
  field.base = grid_pattern(16, 2);
  std::uniform_real_distribution<float> u(-3, 3);
  field.deltas.resize(7 * 5 * 16);
  for (auto& d : field.deltas) d = {u(rng), u(rng)};
  const auto hyp = propagate(Grid(7, 5, 1, 512.0f), field);
  for (float d : hyp.depths.data()) EXPECT_FLOAT_EQ(d, 512.0f);
}

TEST(Propagate, StepBlendAndFallback) {
  Grid depth(6, 3, 1, 500.0f);
  for (int y = 0; y < 3; ++y)
    for (int x = 3; x < 6; ++x) depth.at(x, y) = 800.0f;
  OffsetField field;
  field.width = 6;
  field.height = 3;
  field.base = {{1.0f, 0.0f}, {-5.0f, 0.0f}};
  field.deltas.assign(6 * 3 * 2, Offset2{});
  field.delta(4, 1, 0) = {-2.25f, 0.0f};  // samples x = 2.75, between 500 and 800
  const auto hyp = propagate(depth, field);
  EXPECT_FLOAT_EQ(hyp.depths.at(4, 1, 0), 0.25f * 500.0f + 0.75f * 800.0f);
  EXPECT_FLOAT_EQ(hyp.depths.at(1, 1, 0), 500.0f);
  EXPECT_FLOAT_EQ(hyp.depths.at(4, 1, 1), 800.0f);  // x = -1 is outside, falls back to p
  EXPECT_FLOAT_EQ(hyp.depths.at(5, 1, 1), 500.0f);
}

TEST(Concat, Stacks) {
  HypothesisVolume a{Grid(2, 2, 2, 1.0f)}, b{Grid(2, 2, 3, 2.0f)};
  const auto c = concat(a, b);
  ASSERT_EQ(c.count(), 5);
  EXPECT_EQ(c.depths.at(1, 1, 1), 1.0f);
  EXPECT_EQ(c.depths.at(1, 1, 2), 2.0f);
  EXPECT_EQ(concat(HypothesisVolume{}, b).count(), 3);
  EXPECT_THROW(concat(a, HypothesisVolume{Grid(3, 2, 1)}), ShapeError);
}
