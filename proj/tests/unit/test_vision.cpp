#include <gtest/gtest.h>

#include <random>

#include "evfc/vision.hpp"
#include "oracles.hpp"

namespace evfc {
namespace {

TEST(Synthesize, StageAtThirty) {
  const Image img = synthesize_image(30, 500, 3, 10, 0);
  ASSERT_EQ(img.size(), 500u);
  for (std::int64_t i = -250; i < 250; ++i) EXPECT_EQ(img.at(i), (i >= 29 && i <= 31) ? 10 : 0) << i;
}

TEST(Synthesize, SinglePixelAtOrigin) {
  const Image img = synthesize_image(0, 8, 1, 255, 0);
  for (std::int64_t i = -4; i < 4; ++i) EXPECT_EQ(img.at(i), i == 0 ? 255 : 0);
}

TEST(Synthesize, RoundsToNearestPixel) {
  EXPECT_EQ(centroid(synthesize_image(29.5, 500, 3, 10, 0)).g, 30.0);
  EXPECT_EQ(centroid(synthesize_image(29.49, 500, 3, 10, 0)).g, 29.0);
  EXPECT_EQ(centroid(synthesize_image(-0.5, 500, 3, 10, 0)).g, 0.0);
}

TEST(Synthesize, StageMustStayInFrame) {
  EXPECT_THROW(synthesize_image(251, 500, 3, 10, 0), StageOutOfFrame);
  EXPECT_THROW(synthesize_image(-250, 500, 3, 10, 0), StageOutOfFrame);
  EXPECT_NO_THROW(synthesize_image(248, 500, 3, 10, 0));
  EXPECT_NO_THROW(synthesize_image(-249, 500, 3, 10, 0));
  EXPECT_THROW(synthesize_image(0, 7, 1, 10, 0), OutOfRange);
}

TEST(Centroid, Examples) {
  const Centroid sym = centroid(synthesize_image(0, 500, 3, 10, 0));
  EXPECT_EQ(sym.weighted, 0);
  EXPECT_EQ(sym.total, 30);
  EXPECT_EQ(sym.g, 0.0);
  const Centroid c = centroid(synthesize_image(30, 500, 3, 10, 0));
  EXPECT_EQ(c.weighted, 900);
  EXPECT_EQ(c.total, 30);
  EXPECT_EQ(c.g, 30.0);
  EXPECT_THROW(centroid(Image{std::vector<int>(10, 0)}), AllDarkImage);
}

TEST(Centroid, SymmetricStageSitsAtItsCenter) {
  for (int c = -240; c <= 240; c += 7) {
    for (std::size_t len : {1u, 3u, 5u, 9u}) {
      EXPECT_EQ(centroid(synthesize_image(c, 500, len, 200, 0)).g, static_cast<double>(c)) << c;
    }
  }
}

TEST(Centroid, MatchesBruteForce) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 * (rng() % 300 + 1);
    Image img{std::vector<int>(n)};
    for (auto& p : img.pixels) p = static_cast<int>(rng() % 256);
    img.pixels[rng() % n] = 1 + static_cast<int>(rng() % 255);
    const auto want = oracle::brightness_sums(img.pixels);
    const Centroid got = centroid(img);
    ASSERT_EQ(got.weighted, want.weighted);
    ASSERT_EQ(got.total, want.total);
  }
}

TEST(Control, ProportionalLaw) {
  EXPECT_DOUBLE_EQ(control_law(30, 0.8), 24.0);
  EXPECT_EQ(control_law(17.5, 0.0), 0.0);
  EXPECT_EQ(control_law(0.0, 0.8), 0.0);
}

TEST(Plant, StepExamples) {
  EXPECT_NEAR(plant_step({30.0}, 24.0).y, 28.9416, 1e-12);
  EXPECT_DOUBLE_EQ(plant_step({12.0}, 0.0).y, 0.9804 * 12.0);
  EXPECT_EQ(plant_step({0.0}, 0.0).y, 0.0);
}

TEST(QuantizeGain, Examples) {
  const std::uint64_t t = 281474976546817ULL;
  EXPECT_EQ(quantize_gain(0.8, 1 << 20, t), 838861);
  EXPECT_EQ(quantize_gain(0.0, 1 << 20, t), 0);
  EXPECT_EQ(quantize_gain(-0.5, 2, t), -1);
  EXPECT_EQ(quantize_gain(-0.8, 1 << 20, t), -838861);
  EXPECT_THROW(quantize_gain(1.0, 10.0, 19), GainOverflow);
  EXPECT_NO_THROW(quantize_gain(0.9, 10.0, 19));
}

TEST(QuantizeGain, ErrorWithinHalfStep) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> gains(-10.0, 10.0);
  const std::uint64_t t = 281474976546817ULL;
  for (double delta : {1.0, 8.0, 1048576.0}) {
    for (int i = 0; i < 10000; ++i) {
      const double k = gains(rng);
      const double err = std::abs(k - static_cast<double>(quantize_gain(k, delta, t)) / delta);
      ASSERT_LE(err, 0.5 / delta + 1e-12) << k;
    }
  }
}

TEST(Overflow, BoundaryOfWorstCaseProduct) {
  // 2^20 * 0.8 * 250 * 255 * 500 = 2.67e13
  EXPECT_TRUE(overflow_safe(0.8, 1 << 20, 500, 281474976546817ULL));
  EXPECT_FALSE(overflow_safe(0.8, 1 << 20, 500, 40000000000000ULL));
  EXPECT_FALSE(overflow_safe(0.8, 1 << 30, 500, 281474976546817ULL));
}

TEST(ClosedLoop, PlainLoopConvergesMonotonically) {
  PlantState s{30.0};
  double prev = std::abs(s.y);
  for (int k = 1; k <= 300; ++k) {
    const double g = centroid(synthesize_image(s.y, 500, 3, 10, 0)).g;
    s = plant_step(s, control_law(g, 0.8));
    EXPECT_LE(std::abs(s.y), prev + 1e-12) << k;
    prev = std::abs(s.y);
    if (k == 100) {
      EXPECT_LT(std::abs(s.y), 1.0);
    }
  }
}

}  // namespace
}  // namespace evfc
