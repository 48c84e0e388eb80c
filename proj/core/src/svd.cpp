#include "asvp/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"

namespace asvp {
namespace {

using Index = Eigen::Index;

constexpr int kMaxSweeps = 80;
constexpr double kOrthTol = 1e-15;

// Rotate column pairs of `a` until all are mutually orthogonal; `v` collects
// the rotations so that a_in * v == a_out.
void one_sided_jacobi(Matrix& a, Matrix& v) {
  const Index n = a.cols();
  v.setIdentity(n, n);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double alpha = a.col(p).squaredNorm();
        const double beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= kOrthTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index i = 0; i < a.rows(); ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw NumericError("one-sided Jacobi SVD did not converge within " + std::to_string(kMaxSweeps) + " sweeps");
}

// Fill the listed columns of `u` with unit vectors orthogonal to every other column.
void complete_basis(Matrix& u, const std::vector<Index>& missing) {
  std::vector<bool> filled(static_cast<std::size_t>(u.cols()), true);
  for (Index j : missing) filled[static_cast<std::size_t>(j)] = false;
  Index candidate = 0;
  for (Index j : missing) {
    for (; candidate < u.rows(); ++candidate) {
      Vector e = Vector::Unit(u.rows(), candidate);
      for (int pass = 0; pass < 2; ++pass) {
        for (Index c = 0; c < u.cols(); ++c) {
          if (filled[static_cast<std::size_t>(c)]) e -= u.col(c).dot(e) * u.col(c);
        }
      }
      const double norm = e.norm();
      if (norm > 0.5) {
        u.col(j) = e / norm;
        filled[static_cast<std::size_t>(j)] = true;
        ++candidate;
        break;
      }
    }
  }
}

SvdFactors svd_tall(const Matrix& x) {
  const Index m = x.rows(), n = x.cols();
  Matrix a;
  Matrix q_thin;
  if (m > n) {
    Eigen::HouseholderQR<Matrix> qr(x);
    a = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    q_thin = qr.householderQ() * Matrix::Identity(m, n);
  } else {
    a = x;
  }

  Matrix v;
  one_sided_jacobi(a, v);

  Vector norms(n);
  for (Index j = 0; j < n; ++j) norms(j) = a.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index lhs, Index rhs) { return norms(lhs) > norms(rhs); });

  SvdFactors f;
  f.sigma.resize(n);
  f.v.resize(n, n);
  Matrix u_small(n, n);
  std::vector<Index> missing;
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    const double s = norms(src);
    f.sigma(j) = s;
    f.v.col(j) = v.col(src);
    if (s > 1e-290) {
      u_small.col(j) = a.col(src) / s;
    } else {
      f.sigma(j) = 0.0;
      u_small.col(j).setZero();
      missing.push_back(j);
    }
  }
  if (!missing.empty()) complete_basis(u_small, missing);

  f.u = (m > n) ? Matrix(q_thin * u_small) : u_small;
  return f;
}

}  // namespace

void canonicalize_signs(SvdFactors& f) {
  for (Index j = 0; j < f.u.cols(); ++j) {
    for (Index i = 0; i < f.u.rows(); ++i) {
      const double e = f.u(i, j);
      if (std::abs(e) > kSignThreshold) {
        if (e < 0.0) {
          f.u.col(j) *= -1.0;
          f.v.col(j) *= -1.0;
        }
        break;
      }
    }
  }
}

SvdFactors svd(const Matrix& x) {
  if (!x.allFinite()) throw NumericError("svd: input contains non-finite entries");
  if (x.rows() == 0 || x.cols() == 0) {
    throw ShapeError("svd: empty matrix " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  SvdFactors f;
  if (x.rows() >= x.cols()) {
    f = svd_tall(x);
  } else {
    SvdFactors t = svd_tall(x.transpose());
    f.u = std::move(t.v);
    f.sigma = std::move(t.sigma);
    f.v = std::move(t.u);
  }
  canonicalize_signs(f);
  return f;
}

namespace {

Matrix orthonormal_basis(const Matrix& z) {
  Eigen::HouseholderQR<Matrix> qr(z);
  return qr.householderQ() * Matrix::Identity(z.rows(), z.cols());
}

// Rayleigh-Ritz on span(q): returns Ritz values (descending) and rotates q and
// w = G q into the Ritz basis.
Vector rayleigh_ritz(Matrix& q, Matrix& w) {
  const Matrix t = q.transpose() * w;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (t + t.transpose()));
  if (eig.info() != Eigen::Success) throw NumericError("Rayleigh-Ritz eigensolve failed");
  const Matrix s = eig.eigenvectors().rowwise().reverse();
  q = q * s;
  w = w * s;
  return eig.eigenvalues().reverse();
}

}  // namespace

LeadingEigen leading_eigenpairs(const Matrix& gram, std::size_t k, const SubspaceOptions& opts) {
  const auto dim = static_cast<std::size_t>(gram.rows());
  if (gram.rows() != gram.cols()) throw ShapeError("leading_eigenpairs: Gram matrix must be square");
  if (k > dim) throw ShapeError("leading_eigenpairs: k exceeds dimension");
  if (!gram.allFinite()) throw NumericError("leading_eigenpairs: non-finite Gram matrix");
  LeadingEigen out;
  if (k == 0) {
    out.values.resize(0);
    out.vectors.resize(gram.rows(), 0);
    return out;
  }

  std::size_t block = std::min(dim, k + std::max<std::size_t>(8, k / 2));
  // A block covering half the space converges no faster than a dense solve.
  if (2 * block >= dim) block = dim;
  const auto bk = static_cast<Index>(block);
  const auto kk = static_cast<Index>(k);

  Matrix q;
  if (block == dim) {
    q.setIdentity(gram.rows(), bk);
  } else {
    Rng rng(opts.seed);
    std::normal_distribution<double> normal;
    Matrix z(gram.rows(), bk);
    for (Index j = 0; j < bk; ++j) {
      for (Index i = 0; i < gram.rows(); ++i) z(i, j) = normal(rng);
    }
    q = orthonormal_basis(z);
  }

  Matrix w = gram * q;
  Vector theta = rayleigh_ritz(q, w);
  out.iterations = 1;
  if (block != dim) {
    bool converged = false;
    while (out.iterations < opts.max_iterations) {
      q = orthonormal_basis(w);
      w = gram * q;
      const Vector prev = theta.head(kk);
      theta = rayleigh_ritz(q, w);
      ++out.iterations;
      const double scale = std::max(std::abs(theta(0)), 1e-300);
      if ((theta.head(kk) - prev).cwiseAbs().maxCoeff() <= opts.tolerance * scale) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericError("truncated eigensolver did not converge within the budget of " +
                         std::to_string(opts.max_iterations) + " iterations");
    }
  }

  out.values = theta.head(kk).cwiseMax(0.0);
  out.vectors = q.leftCols(kk);
  return out;
}

}  // namespace asvp
