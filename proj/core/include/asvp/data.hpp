#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asvp/tensor.hpp"

namespace asvp {

enum class Task { denoise, super_resolution, low_light, haze, rain };
enum class UpsampleMode { nearest, bicubic };

std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view s);
std::string_view to_string(UpsampleMode m) noexcept;
UpsampleMode parse_upsample_mode(std::string_view s);

/// Degradation physics for one synthetic restoration task. Only the fields of
/// the selected task are used.
struct DegradationSpec {
  Task task = Task::denoise;
  // denoise: additive Gaussian noise
  double noise_std = 0.1;
  // super_resolution: box downsample by `scale`, re-upsample to full size
  std::size_t scale = 2;
  UpsampleMode upsample = UpsampleMode::bicubic;
  // low_light: gain * x^gamma
  double gamma = 2.0;
  double gain = 1.0;
  // haze: x * t + A * (1 - t); color_cast tints the airlight per channel
  // (underwater-style), channel c gets A * (1 - color_cast * c / (C-1)).
  double transmission = 0.6;
  double airlight = 0.9;
  double color_cast = 0.0;
  // rain: additive oriented streaks
  std::size_t rain_streaks = 40;
  double rain_angle_deg = 75.0;
  std::size_t rain_length = 7;
  double rain_intensity = 0.35;

  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic per (spec, spec.seed); clean must lie in [0,1]; output is
/// clipped to [0,1]. Images are (C,H,W).
Tensor degrade(const Tensor& clean, const DegradationSpec& spec);

/// Procedural clean image in [0,1]: gradient background, rectangles,
/// ellipses and a sinusoidal texture.
Tensor synth_clean_image(std::size_t channels, std::size_t size, std::uint64_t seed);

struct ImagePair {
  Tensor clean;
  Tensor degraded;
};

using Dataset = std::vector<ImagePair>;

/// Pairs for sample indices [first, first + count). Sample i uses the seed
/// derive_seed(seed, {i}); train and test splits use disjoint index ranges.
Dataset make_dataset(const DegradationSpec& spec, std::size_t first, std::size_t count, std::size_t size,
                     std::size_t channels, std::uint64_t seed);

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// Train = indices [0, n_train), test = [n_train, n_train + n_test).
DatasetSplit make_split(const DegradationSpec& spec, std::size_t n_train, std::size_t n_test, std::size_t size,
                        std::size_t channels, std::uint64_t seed);

/// Stack the clean (or degraded) images of `pairs[first, first+count)` into (B,C,H,W).
Tensor stack_clean(const Dataset& data, std::size_t first, std::size_t count);
Tensor stack_degraded(const Dataset& data, std::size_t first, std::size_t count);
/// Inverse of the two stacks above.
Dataset unstack_pairs(const Tensor& clean, const Tensor& degraded);

// PGM (P5, one channel) and PPM (P6, three channels), maxval 255.
std::vector<std::uint8_t> encode_pnm(const Tensor& image);
Tensor decode_pnm(std::span<const std::uint8_t> bytes);
void write_pnm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pnm(const std::filesystem::path& path);

}  // namespace asvp
