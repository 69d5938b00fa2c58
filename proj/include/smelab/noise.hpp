#pragma once

// Sub-Gaussian noise models and the sample-covariance concentration bound
// used to size the uncertainty sets.

#include "smelab/json_matrix.hpp"
#include "smelab/numerics.hpp"
#include "smelab/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace smelab {

enum class NoiseFamily { gaussian, rademacher, uniform_bounded };

inline std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::rademacher: return "rademacher";
    case NoiseFamily::uniform_bounded: return "uniform-bounded";
  }
  throw std::invalid_argument("unknown noise family");
}

inline NoiseFamily parse_noise_family(const std::string& s) {
  if (s == "gaussian") return NoiseFamily::gaussian;
  if (s == "rademacher") return NoiseFamily::rademacher;
  if (s == "uniform-bounded") return NoiseFamily::uniform_bounded;
  throw std::invalid_argument("unknown noise family '" + s + "'");
}

/// I.i.d. zero-mean noise. Each family is standardized to unit per-coordinate
/// variance and then scaled by `sigma` or by the Cholesky factor of
/// `covariance` when one is given. c1/c2 are the sub-Gaussian constants of
/// the whitened distribution; empty means unknown (calibrate instead).
struct NoiseModel {
  NoiseFamily family = NoiseFamily::gaussian;
  double sigma = 1.0;
  std::optional<Matrix> covariance;
  std::optional<double> c1;
  std::optional<double> c2;

  static NoiseModel gaussian(double sigma = 1.0) {
    return {NoiseFamily::gaussian, sigma, std::nullopt, 1.0, 0.5};
  }
  static NoiseModel rademacher(double sigma = 1.0) {
    return {NoiseFamily::rademacher, sigma, std::nullopt, std::nullopt, std::nullopt};
  }
  static NoiseModel uniform_bounded(double sigma = 1.0) {
    return {NoiseFamily::uniform_bounded, sigma, std::nullopt, std::nullopt, std::nullopt};
  }

  bool constants_known() const { return c1.has_value() && c2.has_value(); }

  void validate() const {
    if (!(std::isfinite(sigma) && sigma > 0.0)) {
      throw std::invalid_argument("noise: sigma must be positive and finite");
    }
    if (covariance) {
      require_finite(*covariance, "noise covariance");
      require_square(*covariance, "noise covariance");
      if ((*covariance - covariance->transpose()).cwiseAbs().maxCoeff() >
          1e-10 * (1.0 + covariance->cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("noise: covariance must be symmetric");
      }
      if (min_eigenvalue(*covariance) <= 0.0) {
        throw std::invalid_argument("noise: covariance must be positive definite");
      }
    }
    if (c1 && !(*c1 > 0.0)) throw std::invalid_argument("noise: c1 must be positive");
    if (c2 && !(*c2 > 0.0)) throw std::invalid_argument("noise: c2 must be positive");
  }

  /// The same family with identity covariance.
  NoiseModel whitened() const {
    NoiseModel m = *this;
    m.sigma = 1.0;
    m.covariance.reset();
    return m;
  }
};

inline void to_json(nlohmann::json& j, const NoiseModel& m) {
  j = nlohmann::json{{"family", to_string(m.family)}, {"sigma", m.sigma}};
  j["c1"] = m.c1 ? nlohmann::json(*m.c1) : nlohmann::json("unknown");
  j["c2"] = m.c2 ? nlohmann::json(*m.c2) : nlohmann::json("unknown");
  if (m.covariance) j["covariance"] = matrix_to_json(*m.covariance);
}

inline void from_json(const nlohmann::json& j, NoiseModel& m) {
  m = NoiseModel{};
  m.family = parse_noise_family(j.value("family", std::string("gaussian")));
  m.sigma = j.value("sigma", 1.0);
  auto read_const = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) {
      if (m.family == NoiseFamily::gaussian) return std::string(key) == "c1" ? 1.0 : 0.5;
      return std::nullopt;
    }
    const auto& v = j.at(key);
    if (v.is_string()) {
      if (v.get<std::string>() == "unknown") return std::nullopt;
      throw std::invalid_argument(std::string("noise: ") + key + " must be a number or \"unknown\"");
    }
    return v.get<double>();
  };
  m.c1 = read_const("c1");
  m.c2 = read_const("c2");
  if (j.contains("covariance")) m.covariance = matrix_from_json(j.at("covariance"));
  m.validate();
}

// ---------------------------------------------------------------------------

inline double kappa_delta(double delta, int n_x, double c1, double c2) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("kappa_delta: delta must lie in (0, 1)");
  }
  if (n_x < 1) throw std::invalid_argument("kappa_delta: n_x must be >= 1");
  if (!(c1 > 0.0) || !(c2 > 0.0)) {
    throw std::invalid_argument("kappa_delta: c1 and c2 must be positive");
  }
  return c1 * std::sqrt(static_cast<double>(n_x)) + std::sqrt(std::log(2.0 / delta) / c2);
}

/// Inflation factor 1 + kappa / sqrt(N) of the noise set.
inline double epsilon(double N, double kappa) {
  if (!(N >= 1.0)) throw std::invalid_argument("epsilon: N must be >= 1");
  if (!(kappa >= 0.0)) throw std::invalid_argument("epsilon: kappa must be >= 0");
  return 1.0 + kappa / std::sqrt(N);
}

struct NoiseBoundParams {
  double delta = 0.05;
  double kappa = 0.0;
  Index N = 1;
  double epsilon = 1.0;
  double eta = 0.0;

  static NoiseBoundParams from_kappa(double delta, double kappa, Index N) {
    NoiseBoundParams p;
    p.delta = delta;
    p.kappa = kappa;
    p.N = N;
    p.epsilon = smelab::epsilon(static_cast<double>(N), kappa);
    p.eta = kappa / std::sqrt(static_cast<double>(N));
    return p;
  }

  static NoiseBoundParams analytic(double delta, int n_x, Index N, double c1, double c2) {
    NoiseBoundParams p = from_kappa(delta, kappa_delta(delta, n_x, c1, c2), N);
    const double n = static_cast<double>(N);
    p.eta = c1 * std::sqrt(n_x / n) + std::sqrt(std::log(2.0 / delta) / (c2 * n));
    return p;
  }
};

// ---------------------------------------------------------------------------

/// n_x x N matrix with i.i.d. columns drawn from `model`.
inline Matrix sample_noise(const NoiseModel& model, Index n_x, Index N, std::uint64_t seed) {
  model.validate();
  if (n_x < 1 || N < 1) throw std::invalid_argument("sample_noise: n_x and N must be >= 1");
  if (model.covariance && model.covariance->rows() != n_x) {
    throw std::invalid_argument("sample_noise: covariance is " +
                                detail::shape_str(*model.covariance) + " but n_x = " +
                                std::to_string(n_x));
  }
  Rng rng(seed);
  Matrix w(n_x, N);
  switch (model.family) {
    case NoiseFamily::gaussian: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (Index c = 0; c < N; ++c)
        for (Index r = 0; r < n_x; ++r) w(r, c) = dist(rng);
      break;
    }
    case NoiseFamily::rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (Index c = 0; c < N; ++c)
        for (Index r = 0; r < n_x; ++r) w(r, c) = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case NoiseFamily::uniform_bounded: {
      const double half_width = std::sqrt(3.0);
      std::uniform_real_distribution<double> dist(-half_width, half_width);
      for (Index c = 0; c < N; ++c)
        for (Index r = 0; r < n_x; ++r) w(r, c) = dist(rng);
      break;
    }
  }
  if (model.covariance) {
    Eigen::LLT<Matrix> llt(symmetrize(*model.covariance));
    return llt.matrixL() * w;
  }
  if (model.sigma != 1.0) w *= model.sigma;
  return w;
}

/// Singular values of W^T (equivalently of W), descending. W^T has
/// min(N, n_x) of them.
inline Vector noise_singular_values(const Matrix& w) {
  require_finite(w, "noise matrix");
  Eigen::JacobiSVD<Matrix> svd(w);
  return svd.singularValues();
}

/// Membership of W in the high-probability noise set, tested as
/// sigma_max(W^T) <= sqrt(N) * epsilon(N, kappa).
inline bool in_noise_set(const Matrix& w, double kappa) {
  const double n = static_cast<double>(w.cols());
  return noise_singular_values(w)(0) <= std::sqrt(n) * epsilon(n, kappa);
}

/// The quadratic form [W^T; I]^T Phi_W [W^T; I] = eps^2 I - (1/N) W W^T of
/// the noise set; W is in the set iff this is PSD.
inline Matrix noise_set_qmi(const Matrix& w, double kappa) {
  require_finite(w, "noise matrix");
  const double n = static_cast<double>(w.cols());
  const double eps = epsilon(n, kappa);
  const Index nx = w.rows();
  return eps * eps * Matrix::Identity(nx, nx) - (w * w.transpose()) / n;
}

struct CovarianceBoundReport {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  bool upper_ok = false;
  bool lower_ok = false;
  double gram_deviation = 0.0;
  double eta = 0.0;
  bool gram_ok = false;
};

/// Evaluates the three concentration events for a noise realization W
/// (n_x x N) with eta = kappa / sqrt(N).
inline CovarianceBoundReport verify_covariance_bounds(const Matrix& w, double kappa) {
  const Vector sv = noise_singular_values(w);
  const double n = static_cast<double>(w.cols());
  const Index nx = w.rows();
  const double root_n = std::sqrt(n);

  CovarianceBoundReport rep;
  rep.sigma_max = sv(0);
  rep.sigma_min = w.cols() < nx ? 0.0 : sv(sv.size() - 1);
  rep.upper_ok = rep.sigma_max <= root_n + kappa;
  rep.lower_ok = rep.sigma_min >= root_n - kappa;
  const Matrix dev = symmetrize(w * w.transpose() / n - Matrix::Identity(nx, nx));
  const Vector ev = symmetric_eigenvalues(dev);
  rep.gram_deviation = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  rep.eta = kappa / root_n;
  rep.gram_ok = rep.gram_deviation <= std::max(rep.eta, rep.eta * rep.eta);
  return rep;
}

/// Empirical (1 - delta)-quantile of sigma_max(W^T) - sqrt(N) over `trials`
/// draws of the whitened model. Uses the ceiling order statistic and clamps
/// at zero.
inline double calibrate_kappa(const NoiseModel& model, Index n_x, Index N, double delta,
                              int trials, std::uint64_t seed) {
  if (trials < 100) {
    throw std::invalid_argument("calibrate_kappa: trials must be >= 100, got " +
                                std::to_string(trials));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("calibrate_kappa: delta must lie in (0, 1)");
  }
  model.validate();
  const NoiseModel white = model.whitened();
  const double root_n = std::sqrt(static_cast<double>(N));
  std::vector<double> excess(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const Matrix w = sample_noise(white, n_x, N, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    excess[static_cast<std::size_t>(t)] = noise_singular_values(w)(0) - root_n;
  }
  std::sort(excess.begin(), excess.end());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - delta) * trials));
  k = std::clamp<std::size_t>(k, 1, excess.size());
  return std::max(0.0, excess[k - 1]);
}

}  // namespace smelab
