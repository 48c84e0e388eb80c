#include "asvp/asvp.hpp"

#include <cmath>
#include <string>

#include "asvp/error.hpp"

namespace asvp {

std::string_view to_string(AsvpMode mode) noexcept {
  return mode == AsvpMode::full ? "full" : "truncated";
}

AsvpMode parse_asvp_mode(std::string_view s) {
  if (s == "full") return AsvpMode::full;
  if (s == "truncated") return AsvpMode::truncated;
  throw ConfigError("unknown ASVP mode '" + std::string(s) + "' (expected full|truncated)");
}

void AsvpConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("ASVP amplification h must be finite and > 0");
  if (!(k_ratio >= 0.0 && k_ratio <= 1.0)) throw ConfigError("ASVP k_ratio must lie in [0, 1]");
}

std::size_t AsvpConfig::top_k(std::size_t rank) const {
  const double raw = std::ceil(k_ratio * static_cast<double>(rank) - 1e-12);
  if (raw <= 0.0) return 0;
  return std::min(rank, static_cast<std::size_t>(raw));
}

SvdFactors amplify_spectrum(const SvdFactors& f, const AsvpConfig& cfg) {
  cfg.validate();
  SvdFactors out = f;
  const std::size_t k = cfg.top_k(f.rank());
  out.sigma.head(static_cast<Eigen::Index>(k)) *= cfg.h;
  return out;
}

Matrix reconstruct(const SvdFactors& f) { return f.u * f.sigma.asDiagonal() * f.v.transpose(); }

double perturbation_energy(std::span<const double> sigma, std::size_t k, double h) {
  if (k > sigma.size()) throw ShapeError("perturbation_energy: k exceeds spectrum length");
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) acc += sigma[j] * sigma[j];
  return (h - 1.0) * (h - 1.0) * acc;
}

double perturbation_energy(const Vector& sigma, std::size_t k, double h) {
  return perturbation_energy(std::span<const double>(sigma.data(), static_cast<std::size_t>(sigma.size())), k, h);
}

Matrix perturb_matrix_full(const Matrix& x, const AsvpConfig& cfg, Vector* sigma_out) {
  const SvdFactors f = svd(x);
  if (sigma_out) *sigma_out = f.sigma;
  return reconstruct(amplify_spectrum(f, cfg));
}

namespace {

template <typename PerturbFn>
DualPathOutput perturb_batched(const Tensor& x, const AsvpConfig& cfg, PerturbFn&& perturb) {
  cfg.validate();
  const Matricized mat = matricize(x);
  const std::size_t r = std::min(mat.rows(), mat.cols());

  DualPathOutput out;
  out.clean = x;
  out.k = cfg.top_k(r);
  Matricized perturbed;
  perturbed.origin = mat.origin;
  perturbed.batched = mat.batched;
  perturbed.blocks.reserve(mat.blocks.size());
  for (const Matrix& block : mat.blocks) {
    Vector sigma;
    perturbed.blocks.push_back(perturb(block, &sigma));
    out.energy += perturbation_energy(sigma, std::min<std::size_t>(out.k, static_cast<std::size_t>(sigma.size())), cfg.h);
    out.spectra.emplace_back(sigma.data(), sigma.data() + sigma.size());
  }
  out.protected_map = dematricize(perturbed);
  return out;
}

}  // namespace

DualPathOutput perturb_feature(const Tensor& x, const AsvpConfig& cfg) {
  return perturb_batched(x, cfg, [&](const Matrix& m, Vector* s) { return perturb_matrix_full(m, cfg, s); });
}

DualPathOutput perturb_feature_truncated(const Tensor& x, const AsvpConfig& cfg, const SubspaceOptions& opts) {
  if (cfg.mode != AsvpMode::truncated) throw ConfigError("perturb_feature_truncated requires mode = truncated");
  return perturb_batched(x, cfg,
                         [&](const Matrix& m, Vector* s) { return perturb_matrix_truncated(m, cfg, s, opts); });
}

DualPathOutput apply_asvp(const Tensor& x, const AsvpConfig& cfg) {
  return cfg.mode == AsvpMode::truncated ? perturb_feature_truncated(x, cfg) : perturb_feature(x, cfg);
}

}  // namespace asvp
