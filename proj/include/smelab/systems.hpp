#pragma once

// Benchmark systems that generate regression data X = theta* Z + W.

#include "smelab/numerics.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace smelab {

/// Regression data from one rollout. Column t of Z is the lifted state z_t
/// and column t of X the successor x_{t+1}, t = 0..N-1.
struct TrajectoryData {
  Matrix X;                 // n_x x N
  Matrix Z;                 // n_z x N
  std::optional<Matrix> W;  // n_x x N, true noise when known
  std::optional<Matrix> states;  // full state path, (state dim) x (N+1)

  Index N() const { return Z.cols(); }
  Index n_x() const { return X.rows(); }
  Index n_z() const { return Z.rows(); }

  void validate() const {
    require_finite(X, "trajectory X");
    require_finite(Z, "trajectory Z");
    if (X.cols() != Z.cols()) {
      throw std::invalid_argument("trajectory: X has " + std::to_string(X.cols()) +
                                  " columns but Z has " + std::to_string(Z.cols()));
    }
    if (W && (W->cols() != Z.cols() || W->rows() != X.rows())) {
      throw std::invalid_argument("trajectory: W must be n_x x N");
    }
  }

  /// The first n samples.
  TrajectoryData prefix(Index n) const {
    if (n < 1 || n > N()) throw std::out_of_range("trajectory prefix length out of range");
    TrajectoryData d{X.leftCols(n), Z.leftCols(n), std::nullopt, std::nullopt};
    if (W) d.W = W->leftCols(n);
    if (states) d.states = states->leftCols(n + 1);
    return d;
  }
};

/// x_{t+1} = a x_t + b u_t + w_t.
struct LtiParams {
  double a = 0.9;
  double b = 1.0;

  Matrix theta() const { return (Matrix(1, 2) << a, b).finished(); }
};

/// Psi_{t+1} = Psi_t + Omega_t,
/// Omega_{t+1} = Omega_t - (g/l) sin(Psi_t) - d Omega_t + b u_t + w_t.
struct PendulumParams {
  double g_over_l = 0.1;
  double d = 0.02;
  double b = 1.0;

  /// Parameters of the Omega equation in the lifted coordinates.
  Matrix theta() const { return (Matrix(1, 3) << -g_over_l, 1.0 - d, b).finished(); }
};

namespace detail {

inline void check_lengths(std::span<const double> inputs, const Matrix& noise) {
  if (inputs.empty()) throw std::invalid_argument("simulate: need at least one input");
  if (noise.rows() != 1 || noise.cols() != static_cast<Index>(inputs.size())) {
    throw std::invalid_argument("simulate: noise must be 1 x " + std::to_string(inputs.size()) +
                                ", got " + shape_str(noise));
  }
}

}  // namespace detail

inline TrajectoryData simulate_lti(const LtiParams& p, std::span<const double> inputs,
                                   const Matrix& noise, double x0) {
  detail::check_lengths(inputs, noise);
  const Index n = static_cast<Index>(inputs.size());
  TrajectoryData d{Matrix(1, n), Matrix(2, n), noise, Matrix(1, n + 1)};
  double x = x0;
  (*d.states)(0, 0) = x;
  for (Index t = 0; t < n; ++t) {
    const double u = inputs[static_cast<std::size_t>(t)];
    d.Z(0, t) = x;
    d.Z(1, t) = u;
    x = p.a * x + p.b * u + noise(0, t);
    d.X(0, t) = x;
    (*d.states)(0, t + 1) = x;
  }
  return d;
}

/// z = (sin psi, omega, u).
inline Vector lift_pendulum(double psi, double omega, double u) {
  return (Vector(3) << std::sin(psi), omega, u).finished();
}

inline TrajectoryData simulate_pendulum(const PendulumParams& p, std::span<const double> inputs,
                                        const Matrix& noise, double psi0, double omega0) {
  detail::check_lengths(inputs, noise);
  const Index n = static_cast<Index>(inputs.size());
  TrajectoryData d{Matrix(1, n), Matrix(3, n), noise, Matrix(2, n + 1)};
  double psi = psi0;
  double omega = omega0;
  d.states->col(0) << psi, omega;
  for (Index t = 0; t < n; ++t) {
    const double u = inputs[static_cast<std::size_t>(t)];
    const double s = std::sin(psi);
    d.Z(0, t) = s;
    d.Z(1, t) = omega;
    d.Z(2, t) = u;
    const double next_omega = omega - p.g_over_l * s - p.d * omega + p.b * u + noise(0, t);
    psi = psi + omega;
    omega = next_omega;
    d.X(0, t) = omega;
    d.states->col(t + 1) << psi, omega;
  }
  return d;
}

enum class RescaleMode {
  joint,          // X, Z (and W) divided by sigma; theta* unchanged. Needs n_x = 1.
  left_multiply,  // X (and W) divided by sigma; theta* becomes theta* / sigma.
};

/// Whitens data whose noise has standard deviation `sigma`.
inline TrajectoryData rescale_isotropic(const TrajectoryData& data, double sigma,
                                        RescaleMode mode) {
  if (!(std::isfinite(sigma) && sigma > 0.0)) {
    throw std::invalid_argument("rescale_isotropic: sigma must be positive");
  }
  if (mode == RescaleMode::joint && data.n_x() != 1) {
    throw std::invalid_argument("rescale_isotropic: joint mode requires n_x = 1");
  }
  TrajectoryData out = data;
  const double s = 1.0 / sigma;
  out.X *= s;
  if (out.W) *out.W *= s;
  if (mode == RescaleMode::joint) out.Z *= s;
  return out;
}

struct PeReport {
  double c3_hat = 0.0;
  double c4_hat = 0.0;
  bool is_pe = false;
};

inline constexpr double kPeThreshold = 1e-8;

/// Extreme eigenvalues of the regressor sample covariance (1/N) Z Z^T.
inline PeReport check_pe(const Matrix& Z) {
  require_finite(Z, "check_pe");
  const Vector ev = symmetric_eigenvalues(Z * Z.transpose() / static_cast<double>(Z.cols()));
  PeReport r;
  r.c3_hat = std::max(0.0, ev(0));
  r.c4_hat = std::max(r.c3_hat, ev(ev.size() - 1));
  r.is_pe = r.c3_hat > kPeThreshold;
  return r;
}

}  // namespace smelab
