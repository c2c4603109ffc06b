#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lpm/grid.h"
#include "test_util.h"

using namespace lpm;

TEST(Grid, ConstructorChecksDataLength) {
  EXPECT_THROW(Grid(2, 2, 1, std::vector<float>(3)), std::invalid_argument);
  Grid g(3, 2, 2, std::vector<float>(12, 1.0f));
  EXPECT_EQ(g.pixel_count(), 6u);
  EXPECT_EQ(g.at(2, 1, 1), 1.0f);
}

TEST(Bilinear, ConstantField) {
  Grid g(6, 6, 1, 7.0f);
  const Sample s = bilinear_sample(g, 3.3, 4.7);
  EXPECT_TRUE(s.valid);
  EXPECT_FLOAT_EQ(s.value[0], 7.0f);
}

TEST(Bilinear, Midpoint) {
  Grid g(2, 1, 1, std::vector<float>{0.0f, 10.0f});
  EXPECT_FLOAT_EQ(bilinear_sample(g, 0.5, 0.0).value[0], 5.0f);
}

TEST(Bilinear, HandEvaluated) {
  Grid g(2, 2, 1, std::vector<float>{0, 1, 2, 3});
  // (1-.25)(1-.75)*0 + .25*.25*1 + .75*.75*2 + .25*.75*3
  EXPECT_NEAR(bilinear_sample(g, 0.25, 0.75).value[0], 1.75f, 1e-6);
}

TEST(Bilinear, OutsideClampsAndFlagsInvalid) {
  Grid g(2, 2, 1, std::vector<float>{0, 1, 2, 3});
  const Sample s = bilinear_sample(g, -0.5, 0.0);
  EXPECT_FALSE(s.valid);
  EXPECT_FLOAT_EQ(s.value[0], 0.0f);
  const Sample far = bilinear_sample(g, 5.0, 5.0);
  EXPECT_FALSE(far.valid);
  EXPECT_FLOAT_EQ(far.value[0], 3.0f);
  bool valid = true;
  bilinear_sample_scalar(g, std::nan(""), 0.0, &valid);
  EXPECT_FALSE(valid);
}

TEST(Bilinear, IntegerCoordinatesAreExact) {
  std::mt19937 rng(1);
  const Grid g = test::random_grid(7, 5, 3, rng);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      const Sample s = bilinear_sample(g, x, y);
      for (int c = 0; c < 3; ++c) EXPECT_EQ(s.value[c], g.at(x, y, c));
    }
  }
}

TEST(Bilinear, LinearInGridValues) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  const Grid a = test::random_grid(9, 9, 2, rng);
  const Grid b = test::random_grid(9, 9, 2, rng);
  const float alpha = 0.7f, beta = -1.3f;
  Grid mix(9, 9, 2);
  for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
  for (int t = 0; t < 200; ++t) {
    const double x = u(rng), y = u(rng);
    const Sample sa = bilinear_sample(a, x, y), sb = bilinear_sample(b, x, y), sm = bilinear_sample(mix, x, y);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(sm.value[c], alpha * sa.value[c] + beta * sb.value[c], 1e-5);
  }
}

TEST(Upsample, ConstantAndSinglePixel) {
  const Grid up = upsample_x2(Grid(3, 2, 2, 4.5f));
  EXPECT_EQ(up.width(), 6);
  EXPECT_EQ(up.height(), 4);
  for (float v : up.data()) EXPECT_EQ(v, 4.5f);
  const Grid one = upsample_x2(Grid(1, 1, 1, 5.0f));
  ASSERT_EQ(one.data().size(), 4u);
  for (float v : one.data()) EXPECT_EQ(v, 5.0f);
}

TEST(Upsample, HalfPixelConvention) {
  const Grid up = upsample_x2(Grid(2, 1, 1, std::vector<float>{0.0f, 2.0f}));
  ASSERT_EQ(up.width(), 4);
  EXPECT_FLOAT_EQ(up.at(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(up.at(1, 0), 0.5f);
  EXPECT_FLOAT_EQ(up.at(2, 0), 1.5f);
  EXPECT_FLOAT_EQ(up.at(3, 0), 2.0f);
}

TEST(Downsample, Means) {
  EXPECT_FLOAT_EQ(downsample_x2(Grid(2, 2, 1, std::vector<float>{0, 2, 4, 6})).at(0, 0), 3.0f);
  const Grid checker(4, 2, 1, std::vector<float>{0, 1, 0, 1, 1, 0, 1, 0});
  const Grid d = downsample_x2(checker);
  ASSERT_EQ(d.width(), 2);
  ASSERT_EQ(d.height(), 1);
  EXPECT_FLOAT_EQ(d.at(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(d.at(1, 0), 0.5f);
  const Grid c = downsample_x2(Grid(5, 3, 1, 2.0f));
  EXPECT_EQ(c.width(), 3);
  EXPECT_EQ(c.height(), 2);
  for (float v : c.data()) EXPECT_EQ(v, 2.0f);
}

TEST(Downsample, UndoesUpsampleOnConstant) {
  const Grid g(4, 4, 3, 0.25f);
  EXPECT_EQ(downsample_x2(upsample_x2(g)).data(), g.data());
}

TEST(PadCrop, ReplicateAndRestore) {
  std::mt19937 rng(3);
  const Grid g = test::random_grid(5, 3, 2, rng);
  const Grid p = pad_to(g, 8, 8);
  EXPECT_EQ(p.at(7, 7, 1), g.at(4, 2, 1));
  EXPECT_EQ(p.at(2, 6, 0), g.at(2, 2, 0));
  EXPECT_EQ(crop(p, 5, 3).data(), g.data());
}

TEST(Intensity, ChannelMean) {
  const Grid g(1, 1, 3, std::vector<float>{0.0f, 0.3f, 0.6f});
  EXPECT_NEAR(to_intensity(g).at(0, 0), 0.3f, 1e-7);
}

TEST(ValidityMask, CountAndGrid) {
  ValidityMask m(3, 2);
  m.set(1, 1, true);
  m.set(2, 0, true);
  EXPECT_EQ(m.count(), 2u);
  const Grid g = m.to_grid();
  EXPECT_EQ(g.at(1, 1), 1.0f);
  EXPECT_EQ(g.at(0, 0), 0.0f);
}
