#include "asvp/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"
#include "asvp/tensor_file.hpp"

namespace asvp {

std::string_view to_string(Task t) noexcept {
  switch (t) {
    case Task::denoise: return "denoise";
    case Task::super_resolution: return "super_resolution";
    case Task::low_light: return "low_light";
    case Task::haze: return "haze";
    case Task::rain: return "rain";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  if (s == "denoise") return Task::denoise;
  if (s == "super_resolution") return Task::super_resolution;
  if (s == "low_light") return Task::low_light;
  if (s == "haze") return Task::haze;
  if (s == "rain") return Task::rain;
  throw ConfigError("unknown task '" + std::string(s) +
                    "' (expected denoise|super_resolution|low_light|haze|rain)");
}

std::string_view to_string(UpsampleMode m) noexcept { return m == UpsampleMode::nearest ? "nearest" : "bicubic"; }

UpsampleMode parse_upsample_mode(std::string_view s) {
  if (s == "nearest") return UpsampleMode::nearest;
  if (s == "bicubic") return UpsampleMode::bicubic;
  throw ConfigError("unknown upsample mode '" + std::string(s) + "' (expected nearest|bicubic)");
}

void DegradationSpec::validate() const {
  if (!(noise_std >= 0.0)) throw ConfigError("degradation: noise_std must be >= 0");
  if (scale == 0) throw ConfigError("degradation: scale must be >= 1");
  if (!(gamma > 0.0)) throw ConfigError("degradation: gamma must be > 0");
  if (!(gain > 0.0)) throw ConfigError("degradation: gain must be > 0");
  if (!(transmission > 0.0 && transmission <= 1.0)) throw ConfigError("degradation: transmission must lie in (0, 1]");
  if (!(airlight >= 0.0 && airlight <= 1.0)) throw ConfigError("degradation: airlight must lie in [0, 1]");
  if (!(color_cast >= 0.0 && color_cast <= 1.0)) throw ConfigError("degradation: color_cast must lie in [0, 1]");
  if (!(rain_intensity >= 0.0)) throw ConfigError("degradation: rain_intensity must be >= 0");
}

namespace {

void clip01(Tensor& t) {
  for (double& v : t.data()) v = std::clamp(v, 0.0, 1.0);
}

void check_image(const Tensor& img) {
  if (img.rank() != 3) throw ShapeError("expected a (C,H,W) image, got " + shape_string(img.dims()));
}

double keys_cubic(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

Tensor super_resolve_degrade(const Tensor& clean, std::size_t s, UpsampleMode mode) {
  const std::size_t c_n = clean.dims()[0], h = clean.dims()[1], w = clean.dims()[2];
  if (s == 1) return clean;
  if (h % s != 0 || w % s != 0) {
    throw ConfigError("super_resolution: image size " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by scale " + std::to_string(s));
  }
  const std::size_t lh = h / s, lw = w / s;
  std::vector<double> low(c_n * lh * lw, 0.0);
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::size_t c = 0; c < c_n; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) low[(c * lh + y / s) * lw + x / s] += clean[(c * h + y) * w + x] * inv;

  Tensor out({c_n, h, w});
  auto lowat = [&](std::size_t c, std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(lh) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(lw) - 1);
    return low[(c * lh + static_cast<std::size_t>(y)) * lw + static_cast<std::size_t>(x)];
  };
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double v = 0.0;
        if (mode == UpsampleMode::nearest) {
          v = low[(c * lh + y / s) * lw + x / s];
        } else {
          const double u = (static_cast<double>(y) + 0.5) / static_cast<double>(s) - 0.5;
          const double t = (static_cast<double>(x) + 0.5) / static_cast<double>(s) - 0.5;
          const auto y0 = static_cast<std::ptrdiff_t>(std::floor(u));
          const auto x0 = static_cast<std::ptrdiff_t>(std::floor(t));
          for (std::ptrdiff_t dy = -1; dy <= 2; ++dy) {
            const double wy = keys_cubic(u - static_cast<double>(y0 + dy));
            for (std::ptrdiff_t dx = -1; dx <= 2; ++dx) {
              v += wy * keys_cubic(t - static_cast<double>(x0 + dx)) * lowat(c, y0 + dy, x0 + dx);
            }
          }
        }
        out[(c * h + y) * w + x] = v;
      }
    }
  }
  return out;
}

void add_rain(Tensor& img, const DegradationSpec& spec, Rng& rng) {
  const std::size_t c_n = img.dims()[0], h = img.dims()[1], w = img.dims()[2];
  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(w));
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(h));
  std::uniform_real_distribution<double> strength(0.7, 1.0);
  const double theta = spec.rain_angle_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(theta), cy = std::sin(theta);
  for (std::size_t s = 0; s < spec.rain_streaks; ++s) {
    const double x0 = ux(rng), y0 = uy(rng);
    const double amp = spec.rain_intensity * strength(rng);
    for (std::size_t i = 0; i < spec.rain_length; ++i) {
      const auto px = static_cast<std::ptrdiff_t>(std::floor(x0 + cx * static_cast<double>(i)));
      const auto py = static_cast<std::ptrdiff_t>(std::floor(y0 + cy * static_cast<double>(i)));
      if (px < 0 || py < 0 || px >= static_cast<std::ptrdiff_t>(w) || py >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::size_t c = 0; c < c_n; ++c) {
        img[(c * h + static_cast<std::size_t>(py)) * w + static_cast<std::size_t>(px)] += amp;
      }
    }
  }
}

}  // namespace

Tensor degrade(const Tensor& clean, const DegradationSpec& spec) {
  check_image(clean);
  spec.validate();
  Rng rng(spec.seed);
  Tensor out = clean;
  switch (spec.task) {
    case Task::denoise: {
      if (spec.noise_std > 0.0) {
        std::normal_distribution<double> normal(0.0, spec.noise_std);
        for (double& v : out.data()) v += normal(rng);
      }
      break;
    }
    case Task::super_resolution:
      out = super_resolve_degrade(clean, spec.scale, spec.upsample);
      break;
    case Task::low_light:
      for (double& v : out.data()) v = spec.gain * std::pow(v, spec.gamma);
      break;
    case Task::haze: {
      const std::size_t c_n = clean.dims()[0];
      const std::size_t plane = clean.dims()[1] * clean.dims()[2];
      const double t = spec.transmission;
      for (std::size_t c = 0; c < c_n; ++c) {
        const double tint = c_n > 1 ? 1.0 - spec.color_cast * static_cast<double>(c) / static_cast<double>(c_n - 1) : 1.0;
        const double a = spec.airlight * tint;
        for (std::size_t i = 0; i < plane; ++i) {
          double& v = out[c * plane + i];
          v = v * t + a * (1.0 - t);
        }
      }
      break;
    }
    case Task::rain:
      add_rain(out, spec, rng);
      break;
  }
  clip01(out);
  return out;
}

Tensor synth_clean_image(std::size_t channels, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const std::size_t n = size;
  const double fn = static_cast<double>(n);
  Tensor img({channels, n, n});

  // Background: per-channel linear gradient.
  const double gx = uni(-0.3, 0.3), gy = uni(-0.3, 0.3);
  for (std::size_t c = 0; c < channels; ++c) {
    const double base = uni(0.3, 0.6);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        img[(c * n + y) * n + x] = base + gx * (static_cast<double>(x) / fn - 0.5) + gy * (static_cast<double>(y) / fn - 0.5);
  }

  auto paint = [&](auto&& inside, const std::vector<double>& level, double alpha) {
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
          if (inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
            double& v = img[(c * n + y) * n + x];
            v = (1.0 - alpha) * v + alpha * level[c];
          }
  };
  auto levels = [&]() {
    std::vector<double> l(channels);
    const double shared = uni(0.1, 0.9);
    for (double& v : l) v = std::clamp(shared + uni(-0.1, 0.1), 0.05, 0.95);
    return l;
  };

  const int rects = 2 + static_cast<int>(u01(rng) * 3.0);
  for (int r = 0; r < rects; ++r) {
    const double x0 = uni(0.0, fn * 0.8), y0 = uni(0.0, fn * 0.8);
    const double x1 = x0 + uni(fn * 0.15, fn * 0.5), y1 = y0 + uni(fn * 0.15, fn * 0.5);
    paint([&](double x, double y) { return x >= x0 && x < x1 && y >= y0 && y < y1; }, levels(), uni(0.6, 1.0));
  }
  const int ellipses = 1 + static_cast<int>(u01(rng) * 3.0);
  for (int e = 0; e < ellipses; ++e) {
    const double cx = uni(0.1, 0.9) * fn, cy = uni(0.1, 0.9) * fn;
    const double rx = uni(0.08, 0.3) * fn, ry = uni(0.08, 0.3) * fn;
    paint([&](double x, double y) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      return dx * dx + dy * dy <= 1.0;
    }, levels(), uni(0.6, 1.0));
  }

  // Sinusoidal texture.
  const double amp = uni(0.03, 0.12);
  const double freq = uni(1.5, 6.0) * 2.0 * std::numbers::pi / fn;
  const double angle = uni(0.0, std::numbers::pi);
  const double phase = uni(0.0, 2.0 * std::numbers::pi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        double& v = img[(c * n + y) * n + x];
        v += amp * std::sin(freq * (ca * static_cast<double>(x) + sa * static_cast<double>(y)) + phase);
        v = std::clamp(v, 0.05, 0.95);
      }
  return img;
}

Dataset make_dataset(const DegradationSpec& spec, std::size_t first, std::size_t count, std::size_t size,
                     std::size_t channels, std::uint64_t seed) {
  if (count == 0) throw ConfigError("make_dataset: count must be >= 1");
  if (size == 0 || channels == 0) throw ConfigError("make_dataset: size and channels must be >= 1");
  spec.validate();
  Dataset out;
  out.reserve(count);
  for (std::size_t i = first; i < first + count; ++i) {
    const std::uint64_t s = derive_seed(seed, {i});
    ImagePair p;
    p.clean = synth_clean_image(channels, size, derive_seed(s, {1}));
    DegradationSpec local = spec;
    local.seed = derive_seed(s, {2});
    p.degraded = degrade(p.clean, local);
    out.push_back(std::move(p));
  }
  return out;
}

DatasetSplit make_split(const DegradationSpec& spec, std::size_t n_train, std::size_t n_test, std::size_t size,
                        std::size_t channels, std::uint64_t seed) {
  return {make_dataset(spec, 0, n_train, size, channels, seed),
          make_dataset(spec, n_train, n_test, size, channels, seed)};
}

namespace {

Tensor stack_member(const Dataset& data, std::size_t first, std::size_t count, bool clean) {
  if (first + count > data.size()) throw ShapeError("dataset slice out of range");
  std::vector<Tensor> items;
  items.reserve(count);
  for (std::size_t i = first; i < first + count; ++i) items.push_back(clean ? data[i].clean : data[i].degraded);
  return Tensor::stack(items);
}

}  // namespace

Tensor stack_clean(const Dataset& data, std::size_t first, std::size_t count) {
  return stack_member(data, first, count, true);
}

Tensor stack_degraded(const Dataset& data, std::size_t first, std::size_t count) {
  return stack_member(data, first, count, false);
}

Dataset unstack_pairs(const Tensor& clean, const Tensor& degraded) {
  if (clean.rank() != 4 || clean.dims() != degraded.dims()) throw ShapeError("unstack_pairs: shape mismatch");
  Dataset out;
  for (std::size_t i = 0; i < clean.dims()[0]; ++i) {
    const Shape d{clean.dims()[1], clean.dims()[2], clean.dims()[3]};
    out.push_back({clean.batch_slice(i, 1).reshaped(d), degraded.batch_slice(i, 1).reshaped(d)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNM

std::vector<std::uint8_t> encode_pnm(const Tensor& image) {
  check_image(image);
  const std::size_t c_n = image.dims()[0], h = image.dims()[1], w = image.dims()[2];
  if (c_n != 1 && c_n != 3) throw ShapeError("PNM supports 1 (P5) or 3 (P6) channels");
  const std::string header = std::string(c_n == 1 ? "P5" : "P6") + "\n" + std::to_string(w) + " " +
                             std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + image.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < c_n; ++c) {
        const double v = std::clamp(image[(c * h + y) * w + x], 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
  return out;
}

Tensor decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_ws = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_ws();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw FormatError(std::string("PNM header: missing ") + what);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("PNM: expected P5 or P6 magic");
  }
  const std::size_t c_n = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::size_t w = read_uint("width");
  const std::size_t h = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (w == 0 || h == 0) throw FormatError("PNM header: zero extent");
  if (maxval == 0 || maxval > 255) throw FormatError("PNM header: maxval must be 1..255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PNM header: missing separator");
  ++pos;
  const std::size_t need = w * h * c_n;
  if (bytes.size() - pos < need) {
    throw FormatError("PNM: expected " + std::to_string(need) + " pixel bytes, got " + std::to_string(bytes.size() - pos));
  }
  Tensor img({c_n, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < c_n; ++c)
        img[(c * h + y) * w + x] = static_cast<double>(bytes[pos++]) / static_cast<double>(maxval);
  return img;
}

void write_pnm(const std::filesystem::path& path, const Tensor& image) { write_file_bytes(path, encode_pnm(image)); }

Tensor read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file_bytes(path)); }

}  // namespace asvp
