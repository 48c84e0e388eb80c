#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "asvp/asvp.hpp"
#include "asvp/tensor.hpp"

namespace asvp {

enum class DefenseKind { none, asvp, noise, drop_channel, adversarial };
enum class Intensity { low, high, custom };

std::string_view to_string(DefenseKind kind) noexcept;
std::string_view to_string(Intensity intensity) noexcept;
DefenseKind parse_defense_kind(std::string_view s);

/// One defense row: which perturbation and how strong.
///
/// With `relative_to_feature_std`, noise_std, adv_epsilon and adv_step_size
/// are multiples of std(x) of the feature being defended (the L/H presets use
/// this). `legacy` routes the perturbed map into the owner's own forward pass,
/// as a defense without a clean path would.
struct DefenseSpec {
  DefenseKind kind = DefenseKind::none;
  Intensity intensity = Intensity::custom;
  AsvpConfig asvp;
  double noise_std = 0.0;
  double drop_rate = 0.0;
  std::size_t adv_steps = 3;
  double adv_epsilon = 0.0;
  double adv_step_size = 0.0;  // 0 selects epsilon / steps
  bool adv_random_start = true;
  bool relative_to_feature_std = false;
  bool legacy = false;
  std::uint64_t seed = 0;

  static DefenseSpec none();
  static DefenseSpec asvp_defense(double h, double k_ratio, AsvpMode mode = AsvpMode::full);
  /// none, asvp, asvp-truncated, noise-L, noise-H, dropC-L, dropC-H, adv-L, adv-H.
  static DefenseSpec preset(std::string_view name);

  /// Short row label, e.g. "asvp(h=100,k=0.6)" or "noise-L".
  std::string label() const;
  void validate() const;
};

/// Differentiable scalar map of a feature; writes d loss / d candidate into grad.
using LossTail = std::function<double(const Tensor& candidate, Tensor& grad)>;

struct DefenseContext {
  LossTail loss_tail;
};

Tensor gaussian_noise(const Tensor& x, double stddev, std::uint64_t seed);

/// Zero each (batch, channel) plane independently with probability p; no rescaling.
Tensor channel_dropout(const Tensor& x, double p, std::uint64_t seed);

struct PgdOptions {
  std::size_t steps = 3;
  double step_size = 0.0;
  double epsilon = 0.0;
  bool random_start = false;
  std::uint64_t seed = 0;
};

/// l-infinity PGD ascent on loss_tail around x. The result stays inside the
/// epsilon ball of x. Throws NumericError on a non-finite gradient.
Tensor adversarial_perturb(const Tensor& x, const LossTail& loss_tail, const PgdOptions& opts);

/// Uniform dispatch. The clean path is always a copy of x; `salt` separates
/// the random streams of different samples/taps under one spec seed.
/// Throws ConfigError for the adversarial kind without a loss tail.
DualPathOutput apply_defense(const DefenseSpec& spec, const Tensor& x, const DefenseContext* ctx = nullptr,
                             std::uint64_t salt = 0);

}  // namespace asvp
