#include "asvp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "asvp/error.hpp"

namespace asvp {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.dims() != b.dims()) {
    throw ShapeError("psnr: shape mismatch " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  }
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be > 0");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

std::vector<double> ssim_gaussian_taps() {
  std::vector<double> g(kSsimWindow);
  const double c = static_cast<double>(kSsimWindow / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

namespace {

struct PlaneView {
  const double* a;
  const double* b;
  std::size_t h;
  std::size_t w;
};

double global_ssim(const PlaneView& p, double c1, double c2) {
  const double n = static_cast<double>(p.h * p.w);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < p.h * p.w; ++i) {
    ma += p.a[i];
    mb += p.b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0, cov = 0;
  for (std::size_t i = 0; i < p.h * p.w; ++i) {
    const double da = p.a[i] - ma, db = p.b[i] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

// Separable 'valid' filtering of the five SSIM moment images.
double windowed_ssim(const PlaneView& p, const std::vector<double>& g, double c1, double c2) {
  const std::size_t k = g.size();
  const std::size_t oh = p.h - k + 1, ow = p.w - k + 1;
  const std::size_t n = p.h * p.w;
  std::vector<double> src[5];
  for (auto& s : src) s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[0][i] = p.a[i];
    src[1][i] = p.b[i];
    src[2][i] = p.a[i] * p.a[i];
    src[3][i] = p.b[i] * p.b[i];
    src[4][i] = p.a[i] * p.b[i];
  }
  std::vector<double> mom[5];
  std::vector<double> rows(p.h * ow);
  for (int m = 0; m < 5; ++m) {
    for (std::size_t y = 0; y < p.h; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) acc += g[t] * src[m][y * p.w + x + t];
        rows[y * ow + x] = acc;
      }
    mom[m].assign(oh * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) acc += g[t] * rows[(y + t) * ow + x];
        mom[m][y * ow + x] = acc;
      }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < oh * ow; ++i) {
    const double ma = mom[0][i], mb = mom[1][i];
    const double va = mom[2][i] - ma * ma;
    const double vb = mom[3][i] - mb * mb;
    const double cov = mom[4][i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(oh * ow);
}

}  // namespace

SsimResult ssim_detailed(const Tensor& a, const Tensor& b, double peak) {
  if (a.dims() != b.dims()) {
    throw ShapeError("ssim: shape mismatch " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  }
  if (a.rank() < 2) throw ShapeError("ssim: expected an image of rank >= 2");
  const std::size_t h = a.dims()[a.rank() - 2], w = a.dims()[a.rank() - 1];
  const std::size_t planes = a.size() / (h * w);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const auto g = ssim_gaussian_taps();

  SsimResult r;
  r.global_fallback = h < kSsimWindow || w < kSsimWindow;
  double total = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    const PlaneView view{a.data().data() + p * h * w, b.data().data() + p * h * w, h, w};
    total += r.global_fallback ? global_ssim(view, c1, c2) : windowed_ssim(view, g, c1, c2);
  }
  r.value = total / static_cast<double>(planes);
  return r;
}

double ssim(const Tensor& a, const Tensor& b, double peak) { return ssim_detailed(a, b, peak).value; }

std::vector<std::complex<double>> dft2(std::span<const double> plane, std::size_t height, std::size_t width) {
  if (plane.size() != height * width) throw ShapeError("dft2: plane size does not match extents");
  auto twiddles = [](std::size_t n) {
    std::vector<std::complex<double>> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return t;
  };
  const auto tw = twiddles(width), th = twiddles(height);
  std::vector<std::complex<double>> rows(height * width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t v = 0; v < width; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t x = 0; x < width; ++x) acc += plane[y * width + x] * tw[(v * x) % width];
      rows[y * width + v] = acc;
    }
  std::vector<std::complex<double>> out(height * width);
  for (std::size_t u = 0; u < height; ++u)
    for (std::size_t v = 0; v < width; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < height; ++y) acc += rows[y * width + v] * th[(u * y) % height];
      out[u * width + v] = acc;
    }
  return out;
}

FeatureReport feature_report(const Tensor& x, std::size_t grid_channel) {
  Tensor map;
  if (x.rank() == 4) {
    map = x.batch_slice(0, 1).reshaped({x.dims()[1], x.dims()[2], x.dims()[3]});
  } else if (x.rank() == 3) {
    map = x;
  } else {
    throw ShapeError("feature_report expects a rank 3 or 4 feature map");
  }
  FeatureReport r;
  r.channels = map.dims()[0];
  r.height = map.dims()[1];
  r.width = map.dims()[2];
  const std::size_t hw = r.height * r.width;
  if (grid_channel >= r.channels) throw ShapeError("feature_report: grid channel out of range");

  r.energy = Tensor({r.height, r.width});
  for (std::size_t c = 0; c < r.channels; ++c)
    for (std::size_t i = 0; i < hw; ++i) r.energy[i] += map[c * hw + i] * map[c * hw + i];

  const auto signed_freq = [](std::size_t k, std::size_t n) {
    return k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
  };
  const double hy = static_cast<double>(r.height / 2), hx = static_cast<double>(r.width / 2);
  const auto bands = static_cast<std::size_t>(std::lround(std::sqrt(hy * hy + hx * hx))) + 1;
  std::vector<double> band_sum(bands, 0.0);
  std::vector<std::size_t> band_count(bands, 0);
  const double cutoff = static_cast<double>(std::min(r.height, r.width)) / 4.0;
  double power_total = 0.0, power_high = 0.0;
  for (std::size_t c = 0; c < r.channels; ++c) {
    const auto spec = dft2(std::span<const double>(map.data().data() + c * hw, hw), r.height, r.width);
    for (std::size_t u = 0; u < r.height; ++u)
      for (std::size_t v = 0; v < r.width; ++v) {
        const double fy = signed_freq(u, r.height), fx = signed_freq(v, r.width);
        const double radius = std::sqrt(fy * fy + fx * fx);
        const auto band = static_cast<std::size_t>(std::lround(radius));
        const double mag = std::abs(spec[u * r.width + v]);
        band_sum[band] += mag;
        ++band_count[band];
        power_total += mag * mag;
        if (radius > cutoff) power_high += mag * mag;
      }
  }
  r.radial_profile.resize(bands);
  for (std::size_t i = 0; i < bands; ++i) r.radial_profile[i] = band_count[i] ? band_sum[i] / static_cast<double>(band_count[i]) : 0.0;
  r.high_frequency_fraction = power_total > 0.0 ? power_high / power_total : 0.0;

  const auto [lo, hi] = std::minmax_element(map.data().begin(), map.data().end());
  r.hist_min = *lo;
  r.hist_max = *hi;
  r.max_abs = std::max(std::abs(*lo), std::abs(*hi));
  r.histogram.assign(kHistogramBins, 0);
  const double span = r.hist_max - r.hist_min;
  for (double v : map.data()) {
    std::size_t bin = 0;
    if (span > 0.0) {
      bin = std::min(kHistogramBins - 1, static_cast<std::size_t>((v - r.hist_min) / span * static_cast<double>(kHistogramBins)));
    }
    ++r.histogram[bin];
  }

  r.grid_channel = grid_channel;
  r.grid = Tensor({r.height, r.width},
                  std::vector<double>(map.data().begin() + static_cast<std::ptrdiff_t>(grid_channel * hw),
                                      map.data().begin() + static_cast<std::ptrdiff_t>((grid_channel + 1) * hw)));
  return r;
}

}  // namespace asvp
