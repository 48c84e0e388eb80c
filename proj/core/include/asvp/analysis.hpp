#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "asvp/tensor.hpp"

namespace asvp {

/// PSNR reported for identical inputs (and the upper clamp for all others).
inline constexpr double kPsnrCapDb = 99.0;

struct Metrics {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// 10 log10(peak^2 / MSE), capped at kPsnrCapDb.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct SsimResult {
  double value = 0.0;
  bool global_fallback = false;  // some plane was smaller than the 11x11 window
};

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03,
/// L = peak) over the valid window positions, averaged over every leading
/// (batch/channel) plane. Planes smaller than the window use one global window.
SsimResult ssim_detailed(const Tensor& a, const Tensor& b, double peak = 1.0);
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Normalized 1-D Gaussian taps used by ssim (the 2-D window is their outer product).
std::vector<double> ssim_gaussian_taps();

/// Unnormalized 2-D DFT, X[u,v] = sum x[y,x] exp(-2 pi i (u y / H + v x / W)).
std::vector<std::complex<double>> dft2(std::span<const double> plane, std::size_t height, std::size_t width);

/// Per-feature-map diagnostics: spatial energy, radial spectrum, activation spread.
struct FeatureReport {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor energy;                       // (H,W): sum over channels of x^2
  std::vector<double> radial_profile;  // mean |DFT| per integer radius band, centered spectrum
  double high_frequency_fraction = 0;  // share of spectral energy with radius > min(H,W)/4
  std::vector<std::size_t> histogram;  // 64 bins over [hist_min, hist_max]
  double hist_min = 0.0;
  double hist_max = 0.0;
  double max_abs = 0.0;
  std::size_t grid_channel = 0;
  Tensor grid;                         // (H,W) raw values of grid_channel
};

inline constexpr std::size_t kHistogramBins = 64;

/// Analyzes the first batch element of a (B,)C,H,W map.
FeatureReport feature_report(const Tensor& x, std::size_t grid_channel = 0);

}  // namespace asvp
