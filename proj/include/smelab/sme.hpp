#pragma once

// Set-membership uncertainty sets for theta in X = theta Z + W.
//
// Every set is stored as an ellipsoid in parameter space,
//
//   { theta : (theta - center) shape (theta - center)^T <= radius }  (PSD order),
//
// which is equivalent to the QMI [theta^T; I]^T Phi [theta^T; I] >= 0 with
// Phi = [-shape, shape center^T; center shape, radius - center shape center^T].
// The set is empty exactly when `radius` is not PSD.

#include "smelab/json_matrix.hpp"
#include "smelab/noise.hpp"
#include "smelab/numerics.hpp"
#include "smelab/systems.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace smelab {

/// Regressors are not persistently exciting (Z lacks full row rank).
class PeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SetKind { stochastic_sme, noise_filtered, chi2 };

inline std::string to_string(SetKind k) {
  switch (k) {
    case SetKind::stochastic_sme: return "stochastic-sme";
    case SetKind::noise_filtered: return "noise-filtered";
    case SetKind::chi2: return "chi2";
  }
  throw std::invalid_argument("unknown set kind");
}

inline SetKind parse_set_kind(const std::string& s) {
  if (s == "stochastic-sme") return SetKind::stochastic_sme;
  if (s == "noise-filtered") return SetKind::noise_filtered;
  if (s == "chi2") return SetKind::chi2;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct EllipsoidalParamSet {
  SetKind kind = SetKind::stochastic_sme;
  Matrix center;  // n_x x n_z
  Matrix shape;   // n_z x n_z
  Matrix radius;  // n_x x n_x
  Index N = 0;

  Index n_x() const { return center.rows(); }
  Index n_z() const { return center.cols(); }
};

/// Blocks of Phi such that [theta^T; I]^T Phi [theta^T; I] >= 0 defines a set.
struct QmiBlocks {
  Matrix phi11;  // n_z x n_z
  Matrix phi12;  // n_z x n_x
  Matrix phi22;  // n_x x n_x

  Matrix assemble() const {
    const Index nz = phi11.rows();
    const Index nx = phi22.rows();
    Matrix phi(nz + nx, nz + nx);
    phi << phi11, phi12, phi12.transpose(), phi22;
    return phi;
  }
};

namespace detail {

struct OlsFit {
  Matrix center;
  Matrix z_pinv;  // N x n_z
};

inline OlsFit fit_ols(const TrajectoryData& data) {
  data.validate();
  const PeReport pe = check_pe(data.Z);
  Pseudoinverse pinv = pseudoinverse(data.Z);
  if (!pe.is_pe || pinv.rank < data.n_z()) {
    throw PeError("regressors are not persistently exciting: rank " + std::to_string(pinv.rank) +
                  " of " + std::to_string(data.n_z()) + ", min eigenvalue " +
                  std::to_string(pe.c3_hat));
  }
  return {data.X * pinv.matrix, std::move(pinv.matrix)};
}

inline double sample_count(const TrajectoryData& data) { return static_cast<double>(data.N()); }

}  // namespace detail

/// Least-squares estimate X Z^+.
inline Matrix ols_estimate(const TrajectoryData& data) { return detail::fit_ols(data).center; }

/// The high-probability set of all theta consistent with a noise matrix in
/// the noise set. Centered at the OLS estimate with shape (1/N) Z Z^T; the
/// radius eps^2 I - (1/N) E E^T uses the OLS residual E = X - center Z, which
/// is X projected onto the kernel of Z.
inline EllipsoidalParamSet build_stochastic_set(const TrajectoryData& data, double kappa) {
  const detail::OlsFit fit = detail::fit_ols(data);
  const double n = detail::sample_count(data);
  const double eps = epsilon(n, kappa);
  const Matrix resid = data.X - fit.center * data.Z;
  EllipsoidalParamSet set;
  set.kind = SetKind::stochastic_sme;
  set.center = fit.center;
  set.shape = symmetrize(data.Z * data.Z.transpose() / n);
  set.radius = symmetrize(eps * eps * Matrix::Identity(data.n_x(), data.n_x()) -
                          resid * resid.transpose() / n);
  set.N = data.N();
  return set;
}

/// The same set built literally from an orthonormal kernel basis Zp of Z:
/// theta0 = X Zp^T, radius = eps^2 I - (1/N) theta0 Zp Zp^T theta0^T.
/// Materializes an N x N SVD; meant as a cross-check on small instances.
inline EllipsoidalParamSet lemma1_oracle_set(const TrajectoryData& data, double kappa) {
  const detail::OlsFit fit = detail::fit_ols(data);
  if (data.N() <= data.n_z()) {
    throw std::invalid_argument("lemma1_oracle_set: need N > n_z");
  }
  const double n = detail::sample_count(data);
  const double eps = epsilon(n, kappa);
  const KernelBasis perp = kernel_basis(data.Z);
  const Matrix theta0 = data.X * perp.basis.transpose();
  EllipsoidalParamSet set;
  set.kind = SetKind::stochastic_sme;
  set.center = fit.center;
  set.shape = symmetrize(data.Z * data.Z.transpose() / n);
  set.radius = symmetrize(eps * eps * Matrix::Identity(data.n_x(), data.n_x()) -
                          theta0 * (perp.basis * perp.basis.transpose()) * theta0.transpose() / n);
  set.N = data.N();
  return set;
}

inline QmiBlocks qmi_blocks(const EllipsoidalParamSet& set) {
  QmiBlocks b;
  b.phi11 = -set.shape;
  b.phi12 = set.shape * set.center.transpose();
  b.phi22 = symmetrize(set.radius - set.center * set.shape * set.center.transpose());
  return b;
}

/// QMI of the stochastic set straight from the data: Phi = T^T Phi_W T with
/// Phi_W = diag(-(1/N) I_N, eps^2 I) and T = [-Z^T, X^T; 0, I].
inline QmiBlocks data_qmi_blocks(const TrajectoryData& data, double kappa) {
  data.validate();
  const Index N = data.N();
  const Index nz = data.n_z();
  const Index nx = data.n_x();
  const double n = static_cast<double>(N);
  const double eps = epsilon(n, kappa);

  Matrix T = Matrix::Zero(N + nx, nz + nx);
  T.topLeftCorner(N, nz) = -data.Z.transpose();
  T.topRightCorner(N, nx) = data.X.transpose();
  T.bottomRightCorner(nx, nx).setIdentity();
  Vector phi_w_diag(N + nx);
  phi_w_diag.head(N).setConstant(-1.0 / n);
  phi_w_diag.tail(nx).setConstant(eps * eps);

  const Matrix phi = symmetrize(T.transpose() * phi_w_diag.asDiagonal() * T);
  return {phi.topLeftCorner(nz, nz), phi.topRightCorner(nz, nx), phi.bottomRightCorner(nx, nx)};
}

/// [theta^T; I]^T Phi [theta^T; I].
inline Matrix qmi_value(const QmiBlocks& b, const Matrix& theta) {
  if (theta.rows() != b.phi22.rows() || theta.cols() != b.phi11.rows()) {
    throw std::invalid_argument("qmi_value: theta is " + detail::shape_str(theta) +
                                ", expected " + std::to_string(b.phi22.rows()) + "x" +
                                std::to_string(b.phi11.rows()));
  }
  const Matrix cross = theta * b.phi12;
  return symmetrize(theta * b.phi11 * theta.transpose() + cross + cross.transpose() + b.phi22);
}

inline bool qmi_member(const QmiBlocks& b, const Matrix& theta, double tol) {
  return is_psd(qmi_value(b, theta), tol);
}

/// 1e-9 * (1 + lambda_max(radius)).
inline double default_tolerance(const EllipsoidalParamSet& set) {
  return 1e-9 * (1.0 + std::max(0.0, max_eigenvalue(set.radius)));
}

inline bool is_member(const EllipsoidalParamSet& set, const Matrix& theta,
                      std::optional<double> tol = std::nullopt) {
  if (theta.rows() != set.n_x() || theta.cols() != set.n_z()) {
    throw std::invalid_argument("is_member: theta is " + detail::shape_str(theta) +
                                ", expected " + detail::shape_str(set.center));
  }
  const Matrix delta = theta - set.center;
  return is_psd(set.radius - delta * set.shape * delta.transpose(),
                tol.value_or(default_tolerance(set)));
}

inline bool is_empty(const EllipsoidalParamSet& set, std::optional<double> tol = std::nullopt) {
  return !is_psd(set.radius, tol.value_or(default_tolerance(set)));
}

/// Supremum of ||theta - center||^2 over the set: lambda_max(radius) /
/// lambda_min(shape). Exact for n_x = 1, an upper bound otherwise.
inline double radius_sq(const EllipsoidalParamSet& set) {
  if (is_empty(set)) throw std::domain_error("radius_sq: set is empty");
  const double smin = min_eigenvalue(set.shape);
  if (!(smin > 0.0)) throw std::domain_error("radius_sq: shape is not positive definite");
  return std::max(0.0, max_eigenvalue(set.radius)) / smin;
}

/// Lebesgue volume of a set with scalar radius; zero when empty.
inline double set_volume(const EllipsoidalParamSet& set) {
  if (set.n_x() != 1) throw std::invalid_argument("set_volume: defined only for n_x = 1");
  if (is_empty(set)) return 0.0;
  return ellipsoid_volume(set.shape, set.radius(0, 0));
}

/// Baseline that treats W Z^+ as the disturbance:
/// (1/N) v^T v <= eps^2 Z^+^T Z^+ with v = theta - center. For n_x = 1 this
/// is v S^-1 v^T <= 1 with S = N eps^2 Z^+^T Z^+.
inline EllipsoidalParamSet build_noise_filtered_set(const TrajectoryData& data, double kappa) {
  if (data.n_x() != 1) {
    throw std::invalid_argument("build_noise_filtered_set: requires n_x = 1");
  }
  const detail::OlsFit fit = detail::fit_ols(data);
  const double n = detail::sample_count(data);
  const double eps = epsilon(n, kappa);
  const Matrix s = symmetrize(n * eps * eps * fit.z_pinv.transpose() * fit.z_pinv);
  EllipsoidalParamSet set;
  set.kind = SetKind::noise_filtered;
  set.center = fit.center;
  set.shape = symmetrize(s.inverse());
  set.radius = Matrix::Identity(1, 1);
  set.N = data.N();
  return set;
}

/// Baseline from the chi-squared distribution of the OLS error:
/// (theta - center) Z Z^T (theta - center)^T <= q_{1-delta}(dof) I.
inline EllipsoidalParamSet build_chi2_set(const TrajectoryData& data, double delta, int dof) {
  if (dof < 1) throw std::invalid_argument("build_chi2_set: dof must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("build_chi2_set: delta must lie in (0, 1)");
  }
  const detail::OlsFit fit = detail::fit_ols(data);
  EllipsoidalParamSet set;
  set.kind = SetKind::chi2;
  set.center = fit.center;
  set.shape = symmetrize(data.Z * data.Z.transpose());
  set.radius = chi2_quantile(1.0 - delta, dof) * Matrix::Identity(data.n_x(), data.n_x());
  set.N = data.N();
  return set;
}

inline void to_json(nlohmann::json& j, const EllipsoidalParamSet& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"center", matrix_to_json(s.center)},
                     {"shape", matrix_to_json(s.shape)},
                     {"radius", matrix_to_json(s.radius)},
                     {"N", s.N}};
}

inline void from_json(const nlohmann::json& j, EllipsoidalParamSet& s) {
  s.kind = parse_set_kind(j.at("kind").get<std::string>());
  s.center = matrix_from_json(j.at("center"));
  s.shape = matrix_from_json(j.at("shape"));
  s.radius = matrix_from_json(j.at("radius"));
  s.N = j.at("N").get<Index>();
  if (s.shape.rows() != s.n_z() || s.shape.cols() != s.n_z() || s.radius.rows() != s.n_x() ||
      s.radius.cols() != s.n_x()) {
    throw std::invalid_argument("parameter set json: inconsistent block sizes");
  }
}

}  // namespace smelab
