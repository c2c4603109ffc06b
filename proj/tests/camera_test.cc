#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <fstream>
#include <json.hpp>
#include <random>

#include "lpm/camera.h"
#include "test_util.h"

using namespace lpm;
namespace fs = std::filesystem;

namespace {

Eigen::Matrix3d rot_z(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Matrix3d intrinsics(double f, double cx, double cy) {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = K(1, 1) = f;
  K(0, 2) = cx;
  K(1, 2) = cy;
  return K;
}

CameraModel random_camera(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CameraModel c;
  c.K = intrinsics(400.0 + 200.0 * u(rng), 320.0 + 10.0 * u(rng), 240.0 + 10.0 * u(rng));
  const Eigen::Vector3d axis = Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized();
  c.R = Eigen::AngleAxisd(0.2 * u(rng), axis).toRotationMatrix();
  c.t = Eigen::Vector3d(50 * u(rng), 50 * u(rng), 20 * u(rng));
  c.depth_min = 400;
  c.depth_max = 900;
  return c;
}

}  // namespace

TEST(Camera, ValidateRejectsBadModels) {
  CameraModel c;
  EXPECT_NO_THROW(c.validate());
  CameraModel scaled = c;
  scaled.R *= 2.0;
  EXPECT_THROW(scaled.validate(), std::invalid_argument);
  CameraModel reflect = c;
  reflect.R(0, 0) = -1.0;
  EXPECT_THROW(reflect.validate(), std::invalid_argument);
  CameraModel focal = c;
  focal.K(1, 1) = 0.0;
  EXPECT_THROW(focal.validate(), std::invalid_argument);
  CameraModel range = c;
  range.depth_max = range.depth_min;
  EXPECT_THROW(range.validate(), std::invalid_argument);
}

TEST(Camera, ScaledToLevelKeepsPixelFootprints) {
  CameraModel c;
  c.K = intrinsics(600, 319.5, 239.5);
  const CameraModel s = c.scaled_to_level(1);
  EXPECT_DOUBLE_EQ(s.K(0, 0), 300.0);
  EXPECT_DOUBLE_EQ(s.K(0, 2), 159.5);
  EXPECT_DOUBLE_EQ(s.K(1, 2), 119.5);
  // A world point landing on full-res pixel centers 2u, 2u+1 lands on level pixel u + 0.25.
  const Eigen::Vector3d world = backproject(c, 10.0, 20.0, 700.0);
  const Eigen::Vector2d q = project(s, world).pixel;
  EXPECT_NEAR(q.x(), (10.0 + 0.5) / 2.0 - 0.5, 1e-9);
  EXPECT_NEAR(q.y(), (20.0 + 0.5) / 2.0 - 0.5, 1e-9);
}

TEST(RelativePose, Identity) {
  CameraModel c;
  c.R = rot_z(30);
  c.t = {1, 2, 3};
  const RelativePose r = relative_pose(c, c);
  EXPECT_TRUE(r.R.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  EXPECT_LT(r.t.norm(), 1e-12);
}

TEST(RelativePose, TranslationSign) {
  CameraModel ref, src;
  const double b = 3.0;
  src.t = -src.R * Eigen::Vector3d(b, 0, 0);  // center at (b, 0, 0)
  const RelativePose r = relative_pose(ref, src);
  EXPECT_TRUE(r.t.isApprox(Eigen::Vector3d(-b, 0, 0)));
}

TEST(RelativePose, RotatedReference) {
  CameraModel ref, src;
  ref.R = rot_z(90);
  const RelativePose r = relative_pose(ref, src);
  EXPECT_TRUE(r.R.isApprox(rot_z(-90), 1e-12));
  const RelativePose back = r.inverse();
  EXPECT_TRUE((r.R * back.R).isApprox(Eigen::Matrix3d::Identity(), 1e-12));
}

TEST(Warp, IdentityCameras) {
  const Eigen::Matrix3d K = intrinsics(500, 320, 240);
  const WarpResult w = warp_pixel({17.25, 3.5}, 12.0, K, {}, K);
  ASSERT_TRUE(w.valid);
  EXPECT_NEAR(w.pixel.x(), 17.25, 1e-9);
  EXPECT_NEAR(w.pixel.y(), 3.5, 1e-9);
}

TEST(Warp, HandEvaluatedTranslation) {
  RelativePose rel;
  rel.t = {4, 0, 0};
  const WarpResult w = warp_pixel({100, 50}, 2.0, Eigen::Matrix3d::Identity(), rel, Eigen::Matrix3d::Identity());
  EXPECT_NEAR(w.pixel.x(), 102.0, 1e-12);
  EXPECT_NEAR(w.pixel.y(), 50.0, 1e-12);
  EXPECT_NEAR(w.z_src, 2.0, 1e-12);
}

TEST(Warp, HalfTurnAboutOpticalAxis) {
  RelativePose rel;
  rel.R = rot_z(180);
  const Eigen::Matrix3d K = intrinsics(250, 0, 0);
  const WarpResult w = warp_pixel({1, 0}, 5.0, K, rel, K);
  EXPECT_NEAR(w.pixel.x(), -1.0, 1e-9);
  EXPECT_NEAR(w.pixel.y(), 0.0, 1e-9);
}

TEST(Warp, BehindCameraIsInvalid) {
  RelativePose rel;
  rel.t = {0, 0, -10};
  EXPECT_FALSE(warp_pixel({0, 0}, 5.0, Eigen::Matrix3d::Identity(), rel, Eigen::Matrix3d::Identity()).valid);
}

TEST(Warp, OperatorMatchesDirectForm) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> px(0, 640), d(400, 900);
  for (int i = 0; i < 200; ++i) {
    const CameraModel a = random_camera(rng), b = random_camera(rng);
    const RelativePose rel = relative_pose(a, b);
    const WarpOperator op(a.K, rel, b.K);
    const double x = px(rng), y = px(rng), z = d(rng);
    const WarpResult w0 = warp_pixel({x, y}, z, a.K, rel, b.K);
    const WarpResult w1 = op(x, y, z);
    ASSERT_EQ(w0.valid, w1.valid);
    EXPECT_NEAR((w0.pixel - w1.pixel).norm(), 0.0, 1e-6);
  }
}

TEST(Warp, RoundTripAndScaleInvariance) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> px(0, 640), d(400, 900), s(0.1, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const CameraModel a = random_camera(rng), b = random_camera(rng);
    const RelativePose rel = relative_pose(a, b);
    const Eigen::Vector2d p(px(rng), px(rng));
    const double depth = d(rng);
    const WarpResult fwd = warp_pixel(p, depth, a.K, rel, b.K);
    ASSERT_TRUE(fwd.valid);
    const WarpResult back = warp_pixel(fwd.pixel, fwd.z_src, b.K, rel.inverse(), a.K);
    EXPECT_LT((back.pixel - p).norm(), 1e-3);
    RelativePose scaled = rel;
    const double k = s(rng);
    scaled.t *= k;
    const WarpResult sw = warp_pixel(p, depth * k, a.K, scaled, b.K);
    EXPECT_LT((sw.pixel - fwd.pixel).norm(), 1e-5);
  }
}

TEST(WarpFeatureMap, IdentityCopiesFeatures) {
  std::mt19937 rng(9);
  const Grid f = test::random_grid(6, 5, 4, rng);
  HypothesisVolume hyp{Grid(6, 5, 3, 7.0f)};
  const Eigen::Matrix3d K = intrinsics(10, 3, 2);
  const WarpedVolume w = warp_feature_map(f, hyp, K, {}, K);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      for (int j = 0; j < 3; ++j) {
        ASSERT_TRUE(w.valid[w.cell(x, y, j)]);
        for (int c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(w.values[w.cell(x, y, j) * 4 + c], f.at(x, y, c));
      }
    }
  }
}

TEST(WarpFeatureMap, OutOfViewAndConstant) {
  const Grid f(4, 4, 2, 3.0f);
  HypothesisVolume hyp{Grid(4, 4, 2, 1.0f)};
  RelativePose away;
  away.t = {1000, 0, 0};
  const WarpedVolume out = warp_feature_map(f, hyp, Eigen::Matrix3d::Identity(), away, Eigen::Matrix3d::Identity());
  for (auto v : out.valid) EXPECT_EQ(v, 0);
  RelativePose nudge;
  nudge.t = {0.3, 0.2, 0};
  const WarpedVolume in = warp_feature_map(f, hyp, Eigen::Matrix3d::Identity(), nudge, Eigen::Matrix3d::Identity());
  for (std::size_t i = 0; i < in.valid.size(); ++i) {
    if (!in.valid[i]) continue;
    EXPECT_NEAR(in.values[i * 2], 3.0f, 1e-5);
  }
}

TEST(Projection, BackprojectRoundTrip) {
  std::mt19937 rng(10);
  for (int i = 0; i < 100; ++i) {
    const CameraModel c = random_camera(rng);
    const Eigen::Vector3d w = backproject(c, 123.5, 77.25, 650.0);
    const WarpResult p = project(c, w);
    EXPECT_NEAR(p.pixel.x(), 123.5, 1e-6);
    EXPECT_NEAR(p.pixel.y(), 77.25, 1e-6);
    EXPECT_NEAR(p.z_src, 650.0, 1e-6);
  }
}

TEST(CameraFile, WriteReadRoundTrip) {
  std::mt19937 rng(11);
  const fs::path p = test::scratch_dir("camfile") / "c_cam.txt";
  const CameraModel c = random_camera(rng);
  write_camera_file(p, c);
  const CameraModel r = read_camera_file(p);
  EXPECT_TRUE(r.R.isApprox(c.R, 1e-15));
  EXPECT_TRUE(r.t.isApprox(c.t, 1e-15));
  EXPECT_TRUE(r.K.isApprox(c.K, 1e-15));
  EXPECT_DOUBLE_EQ(r.depth_min, c.depth_min);
  EXPECT_DOUBLE_EQ(r.depth_max, c.depth_max);
}

TEST(CameraFile, FixtureCorpusParses) {
  const fs::path dir = test::source_dir() / "tests" / "fixtures" / "cams";
  std::ifstream in(dir / "expected.json");
  const auto expected = nlohmann::json::parse(in);
  ASSERT_GE(expected.size(), 8u);
  for (const auto& [name, e] : expected.items()) {
    SCOPED_TRACE(name);
    CameraModel c;
    ASSERT_NO_THROW(c = read_camera_file(dir / name));
    EXPECT_NEAR(c.depth_min, e["depth_min"].get<double>(), 1e-9);
    EXPECT_NEAR(c.depth_max, e["depth_max"].get<double>(), 1e-9);
    EXPECT_NEAR(c.K(0, 0), e["fx"].get<double>(), 1e-9);
    EXPECT_NEAR(c.K(1, 2), e["cy"].get<double>(), 1e-9);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.t(i), e["t"][i].get<double>(), 1e-6);
  }
}

TEST(CameraFile, InvalidFixturesAreRejectedWithFileName) {
  const fs::path dir = test::source_dir() / "tests" / "fixtures" / "cams_invalid";
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    SCOPED_TRACE(entry.path().filename().string());
    ++seen;
    try {
      read_camera_file(entry.path());
      ADD_FAILURE() << "accepted";
    } catch (const CameraFileError& e) {
      EXPECT_NE(std::string(e.what()).find(entry.path().filename().string()), std::string::npos);
    }
  }
  EXPECT_GE(seen, 5);
  EXPECT_THROW(read_camera_file(dir / "does_not_exist.txt"), CameraFileError);
}
