#pragma once

// Dense linear algebra and special functions shared by the estimation code.
// Everything here is a pure function of its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace smelab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace detail {

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

/// Throws std::invalid_argument if `m` is empty or has a non-finite entry.
inline void require_finite(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument(std::string(what) + ": matrix must be nonempty");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": matrix has non-finite entries");
  }
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": expected a square matrix, got " +
                                detail::shape_str(m));
  }
}

inline Matrix symmetrize(const Matrix& s) { return 0.5 * (s + s.transpose()); }

/// Singular values at or below this are treated as zero.
inline double rank_cutoff(const Matrix& m, double sigma_max) {
  return static_cast<double>(std::max(m.rows(), m.cols())) *
         std::numeric_limits<double>::epsilon() * sigma_max;
}

struct Pseudoinverse {
  Matrix matrix;
  Index rank = 0;
};

/// Moore-Penrose inverse through a full SVD. Singular values below
/// max(rows, cols) * eps * sigma_max are dropped; the number kept is `rank`.
inline Pseudoinverse pseudoinverse(const Matrix& m) {
  require_finite(m, "pseudoinverse");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rank_cutoff(m, s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      inv(i) = 1.0 / s(i);
      ++rank;
    }
  }
  return {svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose(), rank};
}

/// Orthonormal rows spanning the right kernel of a source matrix.
struct KernelBasis {
  Matrix basis;  // (cols - rank) x cols; zero rows when the source has full column rank

  Index dimension() const { return basis.rows(); }
  bool empty() const { return basis.rows() == 0; }
};

/// Right kernel of `m` from the trailing right singular vectors. Each row is
/// flipped so that its first nonzero entry is positive.
inline KernelBasis kernel_basis(const Matrix& m) {
  require_finite(m, "kernel_basis");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cutoff = rank_cutoff(m, s.size() > 0 ? s(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  const Index cols = m.cols();
  Matrix basis = svd.matrixV().rightCols(cols - rank).transpose();
  for (Index r = 0; r < basis.rows(); ++r) {
    const double scale = basis.row(r).cwiseAbs().maxCoeff();
    for (Index c = 0; c < cols; ++c) {
      if (std::abs(basis(r, c)) > 1e-12 * scale) {
        if (basis(r, c) < 0.0) basis.row(r) *= -1.0;
        break;
      }
    }
  }
  return {std::move(basis)};
}

/// Eigenvalues of the symmetric part of `s`, ascending.
inline Vector symmetric_eigenvalues(const Matrix& s) {
  require_square(s, "symmetric_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& s) { return symmetric_eigenvalues(s)(0); }

inline double max_eigenvalue(const Matrix& s) {
  const Vector ev = symmetric_eigenvalues(s);
  return ev(ev.size() - 1);
}

/// True iff the smallest eigenvalue of (S + S^T)/2 is at least -tol.
inline bool is_psd(const Matrix& s, double tol) {
  require_square(s, "is_psd");
  if (s.size() == 0) return true;
  return min_eigenvalue(s) >= -tol;
}

// ---------------------------------------------------------------------------
// Chi-squared distribution

namespace detail {

// Regularized lower incomplete gamma P(a, x): power series below a + 1,
// Lentz continued fraction for the upper tail otherwise.
inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  if (x < a + 1.0) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < 100000; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * eps) break;
    }
    return std::min(1.0, sum * std::exp(log_prefactor));
  }
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefactor) * h);
}

inline void require_dof(int dof) {
  if (dof < 1) throw std::invalid_argument("chi2: dof must be >= 1, got " + std::to_string(dof));
}

}  // namespace detail

inline double chi2_cdf(double q, int dof) {
  detail::require_dof(dof);
  return detail::gamma_p(0.5 * dof, 0.5 * q);
}

inline double chi2_pdf(double q, int dof) {
  detail::require_dof(dof);
  if (q <= 0.0) return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(q) - 0.5 * q - k * std::log(2.0) - std::lgamma(k));
}

/// Inverse chi-squared CDF by safeguarded Newton iteration inside a bisection
/// bracket.
inline double chi2_quantile(double p, int dof) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("chi2_quantile: p must lie in [0, 1), got " + std::to_string(p));
  }
  detail::require_dof(dof);
  if (p == 0.0) return 0.0;

  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(dof));
  while (chi2_cdf(hi, dof) < p) {
    lo = hi;
    hi *= 2.0;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    const double f = chi2_cdf(x, dof) - p;
    if (f == 0.0) return x;
    if (f < 0.0) lo = x; else hi = x;
    const double dens = chi2_pdf(x, dof);
    double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x) || hi - lo <= 1e-15 * hi) return next;
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------

/// Volume of the unit ball in dimension n.
inline double unit_ball_volume(Index n) {
  const double half = 0.5 * static_cast<double>(n);
  return std::exp(half * std::log(std::numbers::pi) - std::lgamma(half + 1.0));
}

/// Volume of {v : v * shape * v^T <= radius}; zero when radius <= 0.
inline double ellipsoid_volume(const Matrix& shape, double radius) {
  require_finite(shape, "ellipsoid_volume");
  require_square(shape, "ellipsoid_volume");
  Eigen::LLT<Matrix> llt(symmetrize(shape));
  if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
    throw std::invalid_argument("ellipsoid_volume: shape must be positive definite");
  }
  if (!(radius > 0.0)) return 0.0;
  const Index n = shape.rows();
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return unit_ball_volume(n) *
         std::exp(0.5 * static_cast<double>(n) * std::log(radius) - 0.5 * log_det);
}

}  // namespace smelab
