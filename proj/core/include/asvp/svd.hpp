#pragma once

#include <cstddef>
#include <cstdint>

#include "asvp/tensor.hpp"

namespace asvp {

/// Thin SVD X = U diag(sigma) V^T with r = min(m, n).
///
/// sigma is non-increasing and nonnegative; U (m x r) and V (n x r) have
/// orthonormal columns. The first entry of each U column whose magnitude
/// exceeds kSignThreshold is nonnegative, which makes the factors
/// deterministic for a given input.
struct SvdFactors {
  Matrix u;
  Vector sigma;
  Matrix v;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(sigma.size()); }
};

inline constexpr double kSignThreshold = 1e-12;

/// One-sided Jacobi SVD, preceded by a Householder QR when the matrix is tall
/// (and applied to the transpose when it is wide).
/// Throws NumericError on non-finite input or if the sweeps fail to converge.
SvdFactors svd(const Matrix& x);

/// Flip column pairs of U/V so the sign convention above holds.
void canonicalize_signs(SvdFactors& f);

/// Options for the leading-subspace solver used by the truncated ASVP path.
struct SubspaceOptions {
  std::size_t max_iterations = 500;
  double tolerance = 1e-13;  // relative change of the top-k Ritz values
  std::uint64_t seed = 0x7A5C0FFEEULL;
};

/// Leading k eigenpairs of a symmetric PSD Gram matrix, descending. Block
/// subspace iteration with Rayleigh-Ritz; a dense solve when the block would
/// cover half the space. Throws NumericError naming the iteration budget when
/// the iteration does not converge.
struct LeadingEigen {
  Vector values;   // length k
  Matrix vectors;  // dim x k, orthonormal columns
  std::size_t iterations = 0;
};

LeadingEigen leading_eigenpairs(const Matrix& gram, std::size_t k, const SubspaceOptions& opts = {});

}  // namespace asvp
