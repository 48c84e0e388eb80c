#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "asvp/analysis.hpp"
#include "asvp/error.hpp"

using namespace asvp;

namespace {

Tensor random_image(Shape dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(std::move(dims));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// straight windowed SSIM over one H x W plane
double naive_ssim(const Tensor& a, const Tensor& b, std::size_t h, std::size_t w) {
  const int r = 5;
  std::vector<double> g(11);
  double gs = 0.0;
  for (int i = -r; i <= r; ++i) gs += g[static_cast<std::size_t>(i + r)] = std::exp(-i * i / (2 * 1.5 * 1.5));
  for (double& v : g) v /= gs;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 11 <= h; ++y)
    for (std::size_t x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
          const double k = g[i] * g[j];
          const double va = a[(y + i) * w + x + j], vb = b[(y + i) * w + x + j];
          ma += k * va;
          mb += k * vb;
          aa += k * va * va;
          bb += k * vb * vb;
          ab += k * va * vb;
        }
      const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

Tensor cosine_map(std::size_t n, double fy, double fx) {
  Tensor t({1, 1, n, n});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      t.at(0, 0, y, x) = std::cos(2 * std::numbers::pi * (fy * y + fx * x) / static_cast<double>(n));
  return t;
}

}  // namespace

TEST(Psnr, ClosedForms) {
  const Tensor a(Shape{4}, 1.0), b(Shape{4}, 0.0);
  EXPECT_NEAR(psnr(a, b, 2.0), 6.0206, 1e-4);
  EXPECT_NEAR(psnr(a, b, 255.0), 48.1308, 1e-4);
  EXPECT_EQ(psnr(a, a), kPsnrCapDb);
  EXPECT_THROW(psnr(a, Tensor(Shape{3}, 0.0)), ShapeError);
}

TEST(Ssim, GaussianTaps) {
  const auto g = ssim_gaussian_taps();
  ASSERT_EQ(g.size(), kSsimWindow);
  double s = 0.0;
  for (double v : g) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(g[0], g[10]);
  EXPECT_NEAR(g[5] / g[6], std::exp(1.0 / (2 * kSsimSigma * kSsimSigma)), 1e-12);
}

TEST(Ssim, MatchesNaiveWindowedOracle) {
  const Tensor a = random_image({1, 1, 14, 17}, 1);
  Tensor b = a;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : b.data()) v += n(rng);
  const SsimResult r = ssim_detailed(a, b);
  EXPECT_FALSE(r.global_fallback);
  EXPECT_NEAR(r.value, naive_ssim(a, b, 14, 17), 1e-12);
  EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  for (std::uint64_t seed = 10; seed < 210; ++seed) {
    const Tensor a = random_image({1, 1, 11 + seed % 14, 11 + seed / 14 % 14}, seed);
    EXPECT_EQ(ssim(a, a), 1.0) << "seed " << seed;
  }
}

TEST(Ssim, ConstantImagesClosedForm) {
  const Tensor a(Shape{1, 12, 12}, 0.2), b(Shape{1, 12, 12}, 0.6);
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(a, b), (2 * 0.2 * 0.6 + c1) / (0.04 + 0.36 + c1), 1e-12);
}

TEST(Ssim, SmallPlanesFallBackToGlobalWindow) {
  const Tensor a = random_image({2, 3, 8, 8}, 3);
  const Tensor b = random_image({2, 3, 8, 8}, 4);
  const SsimResult r = ssim_detailed(a, b);
  EXPECT_TRUE(r.global_fallback);
  EXPECT_GT(r.value, -1.0);
  EXPECT_LT(r.value, 1.0);
  EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Dft, ParsevalAndImpulse) {
  const Tensor x = random_image({6, 10}, 5);
  const auto X = dft2(x.data(), 6, 10);
  double time = 0.0, freq = 0.0;
  for (double v : x.data()) time += v * v;
  for (const auto& c : X) freq += std::norm(c);
  EXPECT_NEAR(freq, 60.0 * time, 1e-9 * freq);
  std::vector<double> impulse(12, 0.0);
  impulse[0] = 1.0;
  for (const auto& c : dft2(impulse, 3, 4)) EXPECT_NEAR(std::abs(c - std::complex<double>(1.0, 0.0)), 0.0, 1e-14);
}

TEST(FeatureReport, SinusoidRadialPeak) {
  const FeatureReport r = feature_report(cosine_map(16, 0, 3));
  std::size_t peak = 0;
  for (std::size_t i = 1; i < r.radial_profile.size(); ++i)
    if (r.radial_profile[i] > r.radial_profile[peak]) peak = i;
  EXPECT_EQ(peak, 3u);
  EXPECT_NEAR(r.high_frequency_fraction, 0.0, 1e-12);
  EXPECT_NEAR(feature_report(cosine_map(16, 6, 0)).high_frequency_fraction, 1.0, 1e-12);
  EXPECT_EQ(r.channels, 1u);
  EXPECT_EQ(r.height, 16u);
}

TEST(FeatureReport, HistogramEnergyAndGrid) {
  Tensor x({2, 3, 4, 5});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 60) - 20.0;
  const FeatureReport r = feature_report(x, 2);
  std::size_t total = 0;
  for (std::size_t c : r.histogram) total += c;
  EXPECT_EQ(r.histogram.size(), kHistogramBins);
  EXPECT_EQ(total, 60u);
  EXPECT_EQ(r.hist_min, -20.0);
  EXPECT_EQ(r.hist_max, 39.0);
  EXPECT_EQ(r.max_abs, 39.0);
  EXPECT_EQ(r.grid.dims(), (Shape{4, 5}));
  EXPECT_EQ(r.grid[0], 20.0);
  const double e00 = 400.0 + 0.0 + 400.0;  // channels 0,1,2 at (0,0): -20, 0, 20
  EXPECT_EQ(r.energy[0], e00);
  EXPECT_THROW(feature_report(x, 3), Error);
}
