#include <gtest/gtest.h>

#include <numbers>
#include <set>

#include "test_support.hpp"

using namespace pb;

using pbtest::naive_dct2;

namespace {

Tensor<double> channel_field(const PoisonPack& p, std::size_t k, std::size_t c) {
  const std::size_t h = p.deltas.dim(2), w = p.deltas.dim(3);
  Tensor<double> f({h, w});
  const float* src = p.deltas.ptr() + (k * p.deltas.dim(1) + c) * h * w;
  for (std::size_t i = 0; i < h * w; ++i) f[i] = src[i];
  return f;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sum_sq(const Tensor<double>& a) {
  double s = 0;
  for (double v : a.data()) s += v * v;
  return s;
}

constexpr float kEps = 8.0f / 255.0f;

}  // namespace

TEST(Dct, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 2u, 5u, 8u, 32u}) {
    const auto x = pbtest::random_tensor<double>({n, n}, rng);
    EXPECT_LE(max_abs_diff(dct2(x), naive_dct2(x)), 1e-12) << n;
  }
}

TEST(Dct, RoundtripAndParseval) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const auto x = pbtest::random_tensor<double>({n, n}, rng, -5, 5);
    const auto y = dct2(x);
    EXPECT_LE(max_abs_diff(idct2(y), x), 1e-10);
    EXPECT_LE(std::abs(sum_sq(y) - sum_sq(x)), 1e-10 * std::max(1.0, sum_sq(x)));
  }
}

TEST(Dct, ConstantBlockHasOnlyDc) {
  Tensor<double> x({32, 32}, 0.75);
  const auto y = dct2(x);
  EXPECT_NEAR(y[0], 0.75 * 32, 1e-12);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_NEAR(y[i], 0.0, 1e-12);
}

TEST(Dct, NonSquareRejected) {
  EXPECT_THROW(dct2(Tensor<double>({4, 5})), Error);
  EXPECT_THROW(idct2(Tensor<double>({16})), Error);
}

TEST(Regions, SingleRegionIsConstantPerChannel) {
  const PoisonPack p = gen_regions_noise(1, 10, kEps, 3);
  ASSERT_EQ(p.count(), 10u);
  EXPECT_EQ(p.mode, PoisonMode::class_wise);
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t c = 0; c < 3; ++c) {
      const auto f = channel_field(p, k, c);
      EXPECT_TRUE(f[0] == kEps || f[0] == -kEps);
      for (double v : f.data()) EXPECT_EQ(v, f[0]);
    }
}

// Each grid cell is flat, and every value is exactly +-eps.
void check_grid(std::size_t n_regions, std::size_t rows, std::size_t cols) {
  const PoisonPack p = gen_regions_noise(n_regions, 10, kEps, 11);
  const std::size_t ph = 32 / rows, pw = 32 / cols;
  EXPECT_EQ(rows * cols, n_regions);
  for (float v : p.deltas.data()) ASSERT_TRUE(v == kEps || v == -kEps);
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t c = 0; c < 3; ++c) {
      const auto f = channel_field(p, k, c);
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
          ASSERT_EQ(f[y * 32 + x], f[(y / ph * ph) * 32 + x / pw * pw]) << n_regions;
    }
}

TEST(Regions, PiecewiseConstantOnDeclaredGrid) {
  check_grid(2, 1, 2);
  check_grid(4, 2, 2);
  check_grid(16, 4, 4);
  check_grid(64, 8, 8);
  check_grid(128, 8, 16);
  check_grid(1024, 32, 32);
}

TEST(Regions, FourRegionsGiveFourSixteenPixelPatches) {
  const PoisonPack p = gen_regions_noise(4, 10, kEps, 5);
  // Each 16x16 quadrant carries its own colour draw: over 10 classes every
  // quadrant differs from quadrant 0 in some class, so the grid has 4 cells.
  auto colour = [&](std::size_t k, std::size_t py, std::size_t px) {
    std::vector<float> c;
    for (std::size_t ch = 0; ch < 3; ++ch) c.push_back(p.deltas[((k * 3 + ch) * 32 + py * 16) * 32 + px * 16]);
    return c;
  };
  for (std::size_t q = 1; q < 4; ++q) {
    bool differs = false;
    for (std::size_t k = 0; k < 10; ++k) differs |= colour(k, q / 2, q % 2) != colour(k, 0, 0);
    EXPECT_TRUE(differs) << "quadrant " << q;
  }
}

TEST(Regions, PerPixelDrawsLookIndependent) {
  const PoisonPack p = gen_regions_noise(1024, 2, kEps, 9);
  std::size_t positive = 0;
  for (float v : p.deltas.data()) positive += v > 0;
  const double frac = static_cast<double>(positive) / static_cast<double>(p.deltas.size());
  EXPECT_NEAR(frac, 0.5, 0.03);
}

TEST(Regions, UnsupportedCountRejected) {
  for (std::size_t n : {0u, 3u, 8u, 32u, 256u, 2048u}) {
    try {
      gen_regions_noise(n, 10, kEps, 0);
      ADD_FAILURE() << n;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), "unsupported_regions");
      EXPECT_EQ(e.kind(), ErrorKind::config);
    }
  }
}

TEST(Regions, DeterministicPerSeed) {
  EXPECT_TRUE(gen_regions_noise(64, 10, kEps, 4) == gen_regions_noise(64, 10, kEps, 4));
  EXPECT_FALSE(gen_regions_noise(64, 10, kEps, 4).deltas == gen_regions_noise(64, 10, kEps, 5).deltas);
}

TEST(LowFreq, SpectrumConfinedToBlock) {
  for (std::size_t n_freq = 2; n_freq <= 8; ++n_freq) {
    const PoisonPack p = gen_lowfreq_noise(n_freq, 10, kEps, 100 + n_freq);
    EXPECT_FLOAT_EQ(p.deltas.max_abs(), kEps);
    for (std::size_t k = 0; k < 10; ++k)
      for (std::size_t c = 0; c < 3; ++c) {
        const auto f = channel_field(p, k, c);
        EXPECT_NEAR(f.max_abs(), kEps, 1e-9);
        const auto s = naive_dct2(f);
        for (std::size_t u = 0; u < 32; ++u)
          for (std::size_t v = 0; v < 32; ++v)
            if (u >= n_freq || v >= n_freq) {
              ASSERT_LE(std::abs(s[u * 32 + v]), 1e-5) << n_freq << " " << u << "," << v;
            }
      }
    if (n_freq > 2) continue;
    // n_freq = 2: exactly the four block coefficients survive.
    const auto s = naive_dct2(channel_field(p, 0, 0));
    std::size_t nonzero = 0;
    for (double v : s.data()) nonzero += std::abs(v) > 1e-5;
    EXPECT_EQ(nonzero, 4u);
  }
}

TEST(LowFreq, DcOnlyFieldIsConstant) {
  std::mt19937_64 rng(3);
  const auto f = lowfreq_field(1, 32, rng);
  for (double v : f.data()) EXPECT_NEAR(v, f[0], 1e-12);
}

TEST(LowFreq, FullBlockFieldIsUnconstrained) {
  std::mt19937_64 rng(4);
  const auto f = lowfreq_field(32, 32, rng);
  const auto s = dct2(f);
  std::size_t high = 0;
  for (std::size_t u = 16; u < 32; ++u)
    for (std::size_t v = 16; v < 32; ++v) high += std::abs(s[u * 32 + v]) > 1e-3;
  EXPECT_GT(high, 200u);
  // Spatial field of i.i.d. spectral Gaussians is itself standard Gaussian.
  EXPECT_NEAR(sum_sq(f) / 1024.0, 1.0, 0.15);
}

TEST(LowFreq, OutOfRangeRejected) {
  EXPECT_THROW(gen_lowfreq_noise(1, 10, kEps, 0), Error);
  EXPECT_THROW(gen_lowfreq_noise(9, 10, kEps, 0), Error);
  EXPECT_THROW(gen_lowfreq_noise(4, 10, kEps, 0, {3, 3, 3}), Error);
}

TEST(Generators, BudgetHoldsAcrossSeedsAndEpsilons) {
  std::mt19937_64 rng(55);
  const std::size_t counts[] = {1, 2, 4, 16, 64, 128, 1024};
  for (int trial = 0; trial < 60; ++trial) {
    const float eps = std::uniform_real_distribution<float>(0.0f, 0.1f)(rng);
    const std::size_t k = 2 + rng() % 9;
    const PoisonPack a = gen_regions_noise(counts[rng() % 7], k, eps, rng());
    const PoisonPack b = gen_lowfreq_noise(2 + rng() % 7, k, eps, rng());
    for (const PoisonPack* p : {&a, &b}) {
      EXPECT_LE(p->deltas.max_abs(), eps + 1e-7f);
      EXPECT_NO_THROW(validate_pack(*p));
      EXPECT_EQ(p->count(), k);
    }
  }
}
