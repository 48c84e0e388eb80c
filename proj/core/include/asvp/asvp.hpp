#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "asvp/svd.hpp"
#include "asvp/tensor.hpp"

namespace asvp {

enum class AsvpMode { full, truncated };

std::string_view to_string(AsvpMode mode) noexcept;
AsvpMode parse_asvp_mode(std::string_view s);

/// Amplification factor h applied to the leading k = ceil(k_ratio * r)
/// singular values of every matricized batch element.
struct AsvpConfig {
  double h = 100.0;
  double k_ratio = 0.6;
  AsvpMode mode = AsvpMode::full;

  /// Throws ConfigError unless h > 0 and k_ratio in [0, 1].
  void validate() const;
  std::size_t top_k(std::size_t rank) const;
  /// The studied regime is h >= 1; smaller factors are allowed but reported.
  bool outside_studied_regime() const noexcept { return h < 1.0; }
};

/// Clean feature for the owner's own forward pass plus the perturbed copy that
/// is handed to whoever consumes intermediate features.
struct DualPathOutput {
  Tensor clean;
  Tensor protected_map;
  double energy = 0.0;  // ||protected - clean||_F^2, summed over the batch

  // Populated by the ASVP paths only: original singular values per batch
  // element and the number amplified.
  std::vector<std::vector<double>> spectra;
  std::size_t k = 0;
};

SvdFactors amplify_spectrum(const SvdFactors& f, const AsvpConfig& cfg);

/// U diag(sigma) V^T.
Matrix reconstruct(const SvdFactors& f);

/// (h - 1)^2 * sum_{j<k} sigma_j^2.
double perturbation_energy(std::span<const double> sigma, std::size_t k, double h);
double perturbation_energy(const Vector& sigma, std::size_t k, double h);

/// Full-SVD ASVP. Batch elements are decomposed independently.
DualPathOutput perturb_feature(const Tensor& x, const AsvpConfig& cfg);

/// Leading-k ASVP: only the top-k singular pairs are computed and the
/// low-rank delta (h - 1) U_k S_k V_k^T is added onto a copy of the clean map.
/// Requires cfg.mode == truncated.
DualPathOutput perturb_feature_truncated(const Tensor& x, const AsvpConfig& cfg, const SubspaceOptions& opts = {});

/// Dispatch on cfg.mode.
DualPathOutput apply_asvp(const Tensor& x, const AsvpConfig& cfg);

/// Matrix-level truncated perturbation: X + (h-1) * P_k(X). Returns the
/// perturbed matrix; `sigma_out` receives the leading singular values.
Matrix perturb_matrix_truncated(const Matrix& x, const AsvpConfig& cfg, Vector* sigma_out = nullptr,
                                const SubspaceOptions& opts = {});

/// Matrix-level full perturbation: U amplify(S) V^T.
Matrix perturb_matrix_full(const Matrix& x, const AsvpConfig& cfg, Vector* sigma_out = nullptr);

}  // namespace asvp
