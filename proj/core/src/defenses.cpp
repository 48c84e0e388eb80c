#include "asvp/defenses.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"

namespace asvp {

std::string_view to_string(DefenseKind kind) noexcept {
  switch (kind) {
    case DefenseKind::none: return "none";
    case DefenseKind::asvp: return "asvp";
    case DefenseKind::noise: return "noise";
    case DefenseKind::drop_channel: return "drop_channel";
    case DefenseKind::adversarial: return "adversarial";
  }
  return "?";
}

std::string_view to_string(Intensity intensity) noexcept {
  switch (intensity) {
    case Intensity::low: return "low";
    case Intensity::high: return "high";
    case Intensity::custom: return "custom";
  }
  return "?";
}

DefenseKind parse_defense_kind(std::string_view s) {
  if (s == "none") return DefenseKind::none;
  if (s == "asvp") return DefenseKind::asvp;
  if (s == "noise") return DefenseKind::noise;
  if (s == "drop_channel") return DefenseKind::drop_channel;
  if (s == "adversarial") return DefenseKind::adversarial;
  throw ConfigError("unknown defense kind '" + std::string(s) +
                    "' (expected none|asvp|noise|drop_channel|adversarial)");
}

DefenseSpec DefenseSpec::none() { return {}; }

DefenseSpec DefenseSpec::asvp_defense(double h, double k_ratio, AsvpMode mode) {
  DefenseSpec s;
  s.kind = DefenseKind::asvp;
  s.asvp = {h, k_ratio, mode};
  return s;
}

DefenseSpec DefenseSpec::preset(std::string_view name) {
  DefenseSpec s;
  if (name == "none") return s;
  if (name == "asvp") return asvp_defense(100.0, 0.6);
  if (name == "asvp-truncated") return asvp_defense(100.0, 0.4, AsvpMode::truncated);

  s.relative_to_feature_std = true;
  if (name == "noise-L" || name == "noise-H") {
    s.kind = DefenseKind::noise;
    s.intensity = name == "noise-L" ? Intensity::low : Intensity::high;
    s.noise_std = name == "noise-L" ? 0.1 : 1.0;
  } else if (name == "dropC-L" || name == "dropC-H") {
    s.kind = DefenseKind::drop_channel;
    s.intensity = name == "dropC-L" ? Intensity::low : Intensity::high;
    s.relative_to_feature_std = false;
    s.drop_rate = name == "dropC-L" ? 0.1 : 0.5;
  } else if (name == "adv-L" || name == "adv-H") {
    s.kind = DefenseKind::adversarial;
    s.intensity = name == "adv-L" ? Intensity::low : Intensity::high;
    s.adv_steps = 3;
    s.adv_epsilon = name == "adv-L" ? 0.05 : 0.5;
  } else {
    throw ConfigError("unknown defense preset '" + std::string(name) + "'");
  }
  return s;
}

std::string DefenseSpec::label() const {
  const char* suffix = intensity == Intensity::low ? "-L" : intensity == Intensity::high ? "-H" : "";
  std::string base;
  switch (kind) {
    case DefenseKind::none: base = "none"; break;
    case DefenseKind::asvp:
      base = fmt::format("asvp{}(h={:g},k={:g})", asvp.mode == AsvpMode::truncated ? "-trunc" : "", asvp.h,
                         asvp.k_ratio);
      break;
    case DefenseKind::noise:
      base = *suffix ? fmt::format("noise{}", suffix) : fmt::format("noise(std={:g})", noise_std);
      break;
    case DefenseKind::drop_channel:
      base = *suffix ? fmt::format("dropC{}", suffix) : fmt::format("dropC(p={:g})", drop_rate);
      break;
    case DefenseKind::adversarial:
      base = *suffix ? fmt::format("adv{}", suffix) : fmt::format("adv(eps={:g},steps={})", adv_epsilon, adv_steps);
      break;
  }
  return legacy ? base + "[legacy]" : base;
}

void DefenseSpec::validate() const {
  if (kind == DefenseKind::asvp) asvp.validate();
  if (!(noise_std >= 0.0)) throw ConfigError("noise stddev must be >= 0");
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw ConfigError("drop rate must lie in [0, 1]");
  if (!(adv_epsilon >= 0.0)) throw ConfigError("adversarial epsilon must be >= 0");
  if (!(adv_step_size >= 0.0)) throw ConfigError("adversarial step size must be >= 0");
}

Tensor gaussian_noise(const Tensor& x, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw ConfigError("noise stddev must be >= 0");
  Tensor out = x;
  if (stddev == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : out.data()) v += normal(rng);
  return out;
}

Tensor channel_dropout(const Tensor& x, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("drop rate must lie in [0, 1]");
  if (x.rank() < 3) throw ShapeError("channel_dropout expects a (B,)C,H,W feature map");
  Tensor out = x;
  const std::size_t plane = x.dims()[x.rank() - 1] * x.dims()[x.rank() - 2];
  const std::size_t planes = x.size() / plane;
  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto data = out.data();
  for (std::size_t c = 0; c < planes; ++c) {
    if (uniform(rng) < p) std::fill_n(data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, 0.0);
  }
  return out;
}

Tensor adversarial_perturb(const Tensor& x, const LossTail& loss_tail, const PgdOptions& opts) {
  if (!(opts.epsilon >= 0.0)) throw ConfigError("PGD epsilon must be >= 0");
  if (opts.steps == 0 || opts.epsilon == 0.0) return x;
  if (!loss_tail) throw ConfigError("PGD requires a loss tail");

  const double eps = opts.epsilon;
  std::vector<double> delta(x.size(), 0.0);
  if (opts.random_start) {
    Rng rng(opts.seed);
    std::uniform_real_distribution<double> uniform(-eps, eps);
    for (double& d : delta) d = uniform(rng);
  }

  Tensor candidate = x;
  Tensor grad(x.dims());
  for (std::size_t step = 0; step < opts.steps; ++step) {
    for (std::size_t i = 0; i < x.size(); ++i) candidate[i] = x[i] + delta[i];
    grad = Tensor(x.dims());
    loss_tail(candidate, grad);
    if (grad.dims() != x.dims()) throw ShapeError("PGD loss tail returned a gradient of the wrong shape");
    if (!grad.all_finite()) throw NumericError("PGD: non-finite gradient at step " + std::to_string(step));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g = grad[i];
      const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      delta[i] = std::clamp(delta[i] + opts.step_size * s, -eps, eps);
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) candidate[i] = x[i] + delta[i];
  return candidate;
}

DualPathOutput apply_defense(const DefenseSpec& spec, const Tensor& x, const DefenseContext* ctx,
                             std::uint64_t salt) {
  spec.validate();
  if (spec.kind == DefenseKind::asvp) return apply_asvp(x, spec.asvp);

  DualPathOutput out;
  out.clean = x;
  const std::uint64_t seed = derive_seed(spec.seed, {salt, static_cast<std::uint64_t>(spec.kind)});
  const double scale = spec.relative_to_feature_std ? stddev(x) : 1.0;
  switch (spec.kind) {
    case DefenseKind::none:
      out.protected_map = x;
      break;
    case DefenseKind::noise:
      out.protected_map = gaussian_noise(x, spec.noise_std * scale, seed);
      break;
    case DefenseKind::drop_channel:
      out.protected_map = channel_dropout(x, spec.drop_rate, seed);
      break;
    case DefenseKind::adversarial: {
      if (ctx == nullptr || !ctx->loss_tail) {
        throw ConfigError("adversarial defense requires a loss tail in the defense context");
      }
      PgdOptions opts;
      opts.steps = spec.adv_steps;
      opts.epsilon = spec.adv_epsilon * scale;
      opts.step_size = spec.adv_step_size > 0.0 ? spec.adv_step_size * scale
                                                : (opts.steps ? opts.epsilon / static_cast<double>(opts.steps) : 0.0);
      opts.random_start = spec.adv_random_start;
      opts.seed = seed;
      out.protected_map = adversarial_perturb(x, ctx->loss_tail, opts);
      break;
    }
    case DefenseKind::asvp:
      break;
  }
  out.energy = frobenius_norm_sq(out.protected_map - out.clean);
  return out;
}

}  // namespace asvp
