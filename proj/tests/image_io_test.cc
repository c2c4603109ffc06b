#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "lpm/image_io.h"
#include "test_util.h"

using namespace lpm;
namespace fs = std::filesystem;

namespace {

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& header, const std::vector<float>& payload) {
  std::ofstream out(p, std::ios::binary);
  out << header;
  out.write(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(float));
}

bool bit_equal(const Grid& a, const Grid& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Pfm, RoundTripIsBitExact) {
  const fs::path dir = test::scratch_dir("pfm");
  std::mt19937 rng(4);
  for (int c : {1, 3}) {
    Grid g = test::random_grid(13, 7, c, rng, -1e6f, 1e6f);
    g.at(0, 0) = std::numeric_limits<float>::denorm_min();
    g.at(1, 0) = -0.0f;
    g.at(2, 0) = std::numeric_limits<float>::infinity();
    write_pfm(dir / "g.pfm", g);
    EXPECT_TRUE(bit_equal(read_pfm(dir / "g.pfm"), g));
  }
}

TEST(Pfm, HeaderWithLittleEndianScale) {
  const fs::path p = test::scratch_dir("pfm_header") / "a.pfm";
  // Rows are stored bottom to top.
  write_bytes(p, "Pf\n2 2\n-1.0\n", {1, 2, 3, 4});
  const Grid g = read_pfm(p);
  ASSERT_EQ(g.width(), 2);
  ASSERT_EQ(g.height(), 2);
  EXPECT_EQ(g.channels(), 1);
  EXPECT_EQ(g.at(0, 1), 1.0f);
  EXPECT_EQ(g.at(1, 0), 4.0f);
}

TEST(Pfm, ThreeChannelVariant) {
  const fs::path p = test::scratch_dir("pfm_color") / "a.pfm";
  write_bytes(p, "PF\n1 1\n-1.0\n", {0.25f, 0.5f, 0.75f});
  const Grid g = read_pfm(p);
  ASSERT_EQ(g.channels(), 3);
  EXPECT_EQ(g.at(0, 0, 2), 0.75f);
}

TEST(Pfm, BigEndianPayload) {
  const fs::path p = test::scratch_dir("pfm_be") / "a.pfm";
  float v = 1.5f;
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = __builtin_bswap32(bits);
  std::memcpy(&v, &bits, 4);
  write_bytes(p, "Pf\n1 1\n1.0\n", {v});
  EXPECT_EQ(read_pfm(p).at(0, 0), 1.5f);
}

TEST(Pfm, Errors) {
  const fs::path dir = test::scratch_dir("pfm_err");
  auto code_of = [](const fs::path& p) {
    try {
      read_pfm(p);
    } catch (const ImageIoError& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error for " << p;
    return ImageErrc::write_failed;
  };
  EXPECT_EQ(code_of(dir / "missing.pfm"), ImageErrc::open_failed);
  write_bytes(dir / "magic.pfm", "P5\n1 1\n255\n", {});
  EXPECT_EQ(code_of(dir / "magic.pfm"), ImageErrc::unsupported_channels);
  write_bytes(dir / "dims.pfm", "Pf\n0 1\n-1.0\n", {});
  EXPECT_EQ(code_of(dir / "dims.pfm"), ImageErrc::bad_header);
  write_bytes(dir / "short.pfm", "Pf\n2 2\n-1.0\n", {1, 2, 3});
  EXPECT_EQ(code_of(dir / "short.pfm"), ImageErrc::truncated);
  EXPECT_THROW(write_pfm(dir / "two.pfm", Grid(1, 1, 2)), ImageIoError);
}

TEST(Png, RoundTripOfQuantizedValues) {
  const fs::path dir = test::scratch_dir("png");
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> u(0, 255);
  for (int c : {1, 3}) {
    Grid g(9, 4, c);
    for (float& v : g.data()) v = u(rng) / 255.0f;
    write_png(dir / "a.png", g);
    const Grid back = read_png(dir / "a.png");
    ASSERT_TRUE(back.same_shape(g));
    for (std::size_t i = 0; i < g.data().size(); ++i) EXPECT_NEAR(back.data()[i], g.data()[i], 1e-7);
  }
}

TEST(Pnm, RoundTripAndDispatch) {
  const fs::path dir = test::scratch_dir("pnm");
  Grid g(3, 2, 3);
  for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] = static_cast<float>(i * 10) / 255.0f;
  write_pnm(dir / "a.ppm", g);
  const Grid back = read_image(dir / "a.ppm");
  ASSERT_TRUE(back.same_shape(g));
  for (std::size_t i = 0; i < g.data().size(); ++i) EXPECT_NEAR(back.data()[i], g.data()[i], 1e-7);
  EXPECT_THROW(read_image(dir / "a.tiff"), ImageIoError);
}

TEST(Pfm, WriteIsDeterministic) {
  const fs::path dir = test::scratch_dir("pfm_det");
  std::mt19937 rng(6);
  const Grid g = test::random_grid(5, 5, 1, rng);
  write_pfm(dir / "a.pfm", g);
  write_pfm(dir / "b.pfm", g);
  EXPECT_EQ(file_bytes(dir / "a.pfm"), file_bytes(dir / "b.pfm"));
}
