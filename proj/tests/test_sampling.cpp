#include <gtest/gtest.h>

#include "support.hpp"

using namespace dimension;
using namespace testing_support;

TEST(Mask, CardiacGeometryBudgetAndAcs) {
  const auto m = generate_mask(192, 25, 4.0, 6, 7);
  for (std::size_t t = 0; t < 25; ++t) {
    EXPECT_EQ(m.count(t), 48u);
    for (std::size_t c = 93; c <= 98; ++c) EXPECT_TRUE(m.line(c, t)) << "line " << c << " frame " << t;
  }
  EXPECT_EQ(m.acs_first(), 93u);
}

TEST(Mask, NoAccelerationSamplesEverything) {
  const auto m = generate_mask(16, 2, 1.0, 2, 0);
  for (std::size_t c = 0; c < 16; ++c)
    for (std::size_t t = 0; t < 2; ++t) EXPECT_TRUE(m.line(c, t));
}

TEST(Mask, SeedDeterminism) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    EXPECT_EQ(generate_mask(64, 4, 4.0, 4, s), generate_mask(64, 4, 4.0, 4, s));
    EXPECT_FALSE(generate_mask(64, 4, 4.0, 4, s) == generate_mask(64, 4, 4.0, 4, s + 100));
  }
}

TEST(Mask, Errors) {
  try {
    generate_mask(16, 1, 4.0, 5, 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ACS exceeds line budget"), std::string::npos);
  }
  EXPECT_THROW(generate_mask(16, 1, 0.5, 2, 0), ConfigError);
  EXPECT_THROW(generate_mask(16, 1, 2.0, 2, 0, 0.0), ConfigError);
}

TEST(Mask, BudgetRounding) {
  EXPECT_EQ(line_budget(192, 4.0), 48u);
  EXPECT_EQ(line_budget(10, 4.0), 3u);  // 2.5 rounds away from zero
  EXPECT_EQ(line_budget(64, 6.0), 11u);
}

TEST(Mask, InvariantsAcrossSeeds) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const std::size_t ny = 20 + s % 13;
    const auto m = generate_mask(ny, 3, 3.0, 3, s);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(m.count(t), line_budget(ny, 3.0));
      for (std::size_t c = m.acs_first(); c < m.acs_first() + 3; ++c) EXPECT_TRUE(m.line(c, t));
    }
  }
}

TEST(Mask, AcsCenteredForOddSizes) {
  const auto m = generate_mask(15, 1, 5.0, 3, 1);
  EXPECT_EQ(m.acs_first(), 6u);  // floor(15/2) - floor(3/2)
  for (std::size_t c = 6; c <= 8; ++c) EXPECT_TRUE(m.line(c, 0));
}

TEST(Mask, FramesDiffer) {
  const auto m = generate_mask(64, 8, 4.0, 4, 3);
  bool any = false;
  for (std::size_t c = 0; c < 64; ++c) any = any || m.line(c, 0) != m.line(c, 1);
  EXPECT_TRUE(any);
}

TEST(Mask, CenteredToFftBinMapping) {
  SamplingMask m(8, 1, 0, 1.0);
  m.set_line(4, 0, true);  // centre line = DC
  EXPECT_TRUE(m.sampled_ky(0, 0));
  m.set_line(3, 0, true);  // one below centre = bin ny-1
  EXPECT_TRUE(m.sampled_ky(7, 0));
  EXPECT_FALSE(m.sampled_ky(1, 0));
}

TEST(Mask, MonteCarloCenterBias) {
  const auto r = center_bias(64, 1, 4.0, 4, 1000);
  EXPECT_TRUE(r.acs_always);
  EXPECT_TRUE(r.peak_next_to_acs);
  EXPECT_TRUE(r.binned_monotone);
  EXPECT_LT(r.spearman, -0.9);
}

TEST(ApplyMask, FullMaskIsIdentity) {
  const auto k = random_volume({6, 8, 2}, 1);
  const auto m = generate_mask(8, 2, 1.0, 0, 0);
  EXPECT_EQ(apply_mask(k, m), k);
}

TEST(ApplyMask, AcsOnlyMaskKeepsOnlyAcsRows) {
  const auto k = random_volume({5, 16, 2}, 2);
  const auto m = generate_mask(16, 2, 4.0, 4, 0);  // budget 4 == acs
  const auto out = apply_mask(k, m);
  for (std::size_t x = 0; x < 5; ++x)
    for (std::size_t ky = 0; ky < 16; ++ky)
      for (std::size_t t = 0; t < 2; ++t) {
        const std::size_t c = (ky + 8) % 16;
        const bool acs = c >= 6 && c < 10;
        if (acs) {
          EXPECT_EQ(out(x, ky, t), k(x, ky, t));
        } else {
          EXPECT_EQ(out(x, ky, t), cplx(0.0, 0.0));
        }
      }
}

TEST(ApplyMask, EnergyNeverIncreasesAndIdempotent) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto k = random_volume({4, 12, 3}, s);
    const auto m = generate_mask(12, 3, 3.0, 2, s);
    const auto once = apply_mask(k, m);
    EXPECT_LE(norm2(once), norm2(k));
    EXPECT_EQ(apply_mask(once, m), once);
  }
}

TEST(ApplyMask, AdjointIsItself) {
  const auto x = random_volume({4, 10, 2}, 31), y = random_volume({4, 10, 2}, 32);
  const auto m = generate_mask(10, 2, 2.0, 2, 4);
  EXPECT_NEAR(inner(apply_mask(x, m), y), inner(x, apply_mask(y, m)), 1e-10);
}

TEST(ApplyMask, DimensionMismatch) {
  const auto k = random_volume({4, 10, 2}, 1);
  EXPECT_THROW(apply_mask(k, generate_mask(12, 2, 2.0, 2, 0)), ShapeError);
  EXPECT_THROW(apply_mask(k, generate_mask(10, 3, 2.0, 2, 0)), ShapeError);
}

TEST(ZeroFilled, FullySampledRecoversImage) {
  const auto s = random_volume({8, 8, 2}, 9);
  EXPECT_LT(max_abs_diff(zero_filled_recon(fft2_frames(s)), s), 1e-10);
  ComplexVolume z({4, 4, 1});
  EXPECT_EQ(zero_filled_recon(z), z);
}

TEST(ZeroFilled, UndersampledPhantomLosesQuality) {
  PhantomSpec ps;
  ps.nx = ps.ny = 32;
  ps.nt = 4;
  ps.seed = 5;
  const auto s = generate_phantom(ps);
  const auto m = generate_mask(32, 4, 4.0, 4, 5);
  const auto ref = magnitude(s);
  const double zf = psnr(ref, magnitude(zero_filled_recon(apply_mask(fft2_frames(s), m))));
  EXPECT_TRUE(std::isfinite(zf));
  EXPECT_LT(zf, psnr(ref, magnitude(zero_filled_recon(fft2_frames(s)))));
}
