#include <cmath>

#include "asvp/asvp.hpp"
#include "asvp/error.hpp"

namespace asvp {

// The leading right (or left, for wide inputs) singular vectors come from the
// Gram matrix of the short side; X P_k then equals U_k S_k V_k^T, so the
// residual spectrum stays on the untouched copy of X.
Matrix perturb_matrix_truncated(const Matrix& x, const AsvpConfig& cfg, Vector* sigma_out,
                                const SubspaceOptions& opts) {
  cfg.validate();
  if (!x.allFinite()) throw NumericError("truncated ASVP: input contains non-finite entries");
  const bool tall = x.rows() >= x.cols();
  const auto r = static_cast<std::size_t>(std::min(x.rows(), x.cols()));
  const std::size_t k = cfg.top_k(r);

  Matrix out = x;
  if (k == 0) {
    if (sigma_out) sigma_out->resize(0);
    return out;
  }

  const Eigen::Index dim = tall ? x.cols() : x.rows();
  Matrix gram = Matrix::Zero(dim, dim);
  if (tall) {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  } else {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  const LeadingEigen lead = leading_eigenpairs(gram, k, opts);
  if (sigma_out) *sigma_out = lead.values.cwiseSqrt();
  if (cfg.h == 1.0) return out;

  const double gain = cfg.h - 1.0;
  if (tall) {
    out.noalias() += gain * ((x * lead.vectors) * lead.vectors.transpose());
  } else {
    out.noalias() += gain * (lead.vectors * (lead.vectors.transpose() * x));
  }
  return out;
}

}  // namespace asvp
