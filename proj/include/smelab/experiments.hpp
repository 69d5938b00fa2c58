#pragma once

// Seeded Monte Carlo harness: simulate, build every requested set on
// growing data prefixes, and aggregate volume / coverage / emptiness.

#include "smelab/noise.hpp"
#include "smelab/numerics.hpp"
#include "smelab/rng.hpp"
#include "smelab/sme.hpp"
#include "smelab/systems.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace smelab {

/// Invalid experiment configuration; `field()` names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument("invalid " + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class SystemKind { lti, pendulum };
enum class KappaMode { analytic, calibrated };

inline std::string to_string(SystemKind s) { return s == SystemKind::lti ? "lti" : "pendulum"; }

inline SystemKind parse_system(const std::string& s) {
  if (s == "lti") return SystemKind::lti;
  if (s == "pendulum") return SystemKind::pendulum;
  throw ConfigError("system", "expected \"lti\" or \"pendulum\", got \"" + s + "\"");
}

/// Rounded 10^2, 10^2.5, ..., 10^4.
inline std::vector<Index> default_n_grid() { return {100, 316, 1000, 3162, 10000}; }

struct ExperimentConfig {
  SystemKind system = SystemKind::lti;
  std::vector<double> sigma_grid{1.0};
  std::vector<Index> N_grid = default_n_grid();
  int trials = 1000;
  double delta = 0.05;
  double sigma_u = 5.0;
  std::uint64_t seed = 0;
  std::vector<SetKind> methods{SetKind::stochastic_sme, SetKind::noise_filtered, SetKind::chi2};
  std::optional<int> dof;  // chi2 degrees of freedom, n_x * n_z when unset
  double sigma_nominal = 1.0;  // assumed noise level; data is divided by it
  LtiParams lti;
  PendulumParams pendulum;
  double x0 = 0.0;
  double psi0 = 0.0;
  double omega0 = 0.0;
  NoiseModel noise = NoiseModel::gaussian();
  KappaMode kappa_mode = KappaMode::analytic;
  int calibration_trials = 2000;

  /// Experiment setup of the two benchmark studies.
  static ExperimentConfig defaults_for(SystemKind system) {
    ExperimentConfig c;
    c.system = system;
    if (system == SystemKind::lti) {
      c.sigma_grid = {0.9, 1.0, 1.1};
      c.sigma_u = 5.0;
      c.sigma_nominal = 1.0;
    } else {
      c.sigma_grid = {0.009, 0.01, 0.011};
      c.sigma_u = 0.05;
      c.sigma_nominal = 0.01;
      c.methods = {SetKind::stochastic_sme, SetKind::noise_filtered};
    }
    return c;
  }

  Index n_z() const { return system == SystemKind::lti ? 2 : 3; }
  int chi2_dof() const { return dof.value_or(static_cast<int>(n_z())); }

  Matrix theta_star() const {
    return system == SystemKind::lti ? lti.theta() : pendulum.theta();
  }

  void validate() const {
    if (trials < 1) throw ConfigError("trials", "must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) {
      throw ConfigError("delta", "must lie in (0, 1), got " + std::to_string(delta));
    }
    if (sigma_grid.empty()) throw ConfigError("sigma_grid", "must not be empty");
    for (double s : sigma_grid) {
      if (!(std::isfinite(s) && s > 0.0)) throw ConfigError("sigma_grid", "entries must be > 0");
    }
    if (N_grid.empty()) throw ConfigError("N_grid", "must not be empty");
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
      if (N_grid[i] < 1) throw ConfigError("N_grid", "entries must be >= 1");
      if (i > 0 && N_grid[i] <= N_grid[i - 1]) {
        throw ConfigError("N_grid", "must be strictly increasing");
      }
    }
    if (!(std::isfinite(sigma_u) && sigma_u > 0.0)) throw ConfigError("sigma_u", "must be > 0");
    if (!(std::isfinite(sigma_nominal) && sigma_nominal > 0.0)) {
      throw ConfigError("sigma_nominal", "must be > 0");
    }
    if (methods.empty()) throw ConfigError("methods", "must not be empty");
    if (dof && *dof < 1) throw ConfigError("dof", "must be >= 1");
    try {
      noise.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("noise", e.what());
    }
    if (noise.covariance) throw ConfigError("noise", "covariance is not supported for scalar systems");
    if (kappa_mode == KappaMode::analytic && !noise.constants_known()) {
      throw ConfigError("kappa_mode",
                        "noise constants c1/c2 are unknown; use \"calibrated\"");
    }
    if (kappa_mode == KappaMode::calibrated && calibration_trials < 100) {
      throw ConfigError("calibration_trials", "must be >= 100");
    }
  }
};

namespace detail {

template <typename T>
T config_field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace detail

/// Missing fields take the defaults of the configured system. Pass
/// `validate = false` to apply further overrides before validating.
inline ExperimentConfig config_from_json(const nlohmann::json& j, bool validate = true) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  static const char* const known[] = {
      "system", "sigma_grid", "N_grid", "trials",  "delta",   "sigma_u",     "seed",
      "methods", "dof",       "sigma_nominal", "a", "b",     "g_over_l",    "d",
      "x0",      "psi0",      "omega0", "noise",   "kappa_mode", "calibration_trials"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError(key, "unknown config field");
    }
  }
  using detail::config_field;
  const SystemKind system =
      j.contains("system") ? parse_system(config_field<std::string>(j, "system")) : SystemKind::lti;
  ExperimentConfig c = ExperimentConfig::defaults_for(system);
  if (j.contains("sigma_grid")) c.sigma_grid = config_field<std::vector<double>>(j, "sigma_grid");
  if (j.contains("N_grid")) c.N_grid = config_field<std::vector<Index>>(j, "N_grid");
  if (j.contains("trials")) c.trials = config_field<int>(j, "trials");
  if (j.contains("delta")) c.delta = config_field<double>(j, "delta");
  if (j.contains("sigma_u")) c.sigma_u = config_field<double>(j, "sigma_u");
  if (j.contains("seed")) c.seed = config_field<std::uint64_t>(j, "seed");
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : config_field<std::vector<std::string>>(j, "methods")) {
      try {
        c.methods.push_back(parse_set_kind(m));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("methods", e.what());
      }
    }
  }
  if (j.contains("dof")) c.dof = config_field<int>(j, "dof");
  if (j.contains("sigma_nominal")) c.sigma_nominal = config_field<double>(j, "sigma_nominal");
  if (j.contains("a")) c.lti.a = config_field<double>(j, "a");
  if (j.contains("b")) {
    c.lti.b = config_field<double>(j, "b");
    c.pendulum.b = c.lti.b;
  }
  if (j.contains("g_over_l")) c.pendulum.g_over_l = config_field<double>(j, "g_over_l");
  if (j.contains("d")) c.pendulum.d = config_field<double>(j, "d");
  if (j.contains("x0")) c.x0 = config_field<double>(j, "x0");
  if (j.contains("psi0")) c.psi0 = config_field<double>(j, "psi0");
  if (j.contains("omega0")) c.omega0 = config_field<double>(j, "omega0");
  if (j.contains("noise")) {
    try {
      c.noise = j.at("noise").get<NoiseModel>();
    } catch (const std::exception& e) {
      throw ConfigError("noise", e.what());
    }
  }
  if (j.contains("kappa_mode")) {
    const auto mode = config_field<std::string>(j, "kappa_mode");
    if (mode == "analytic") c.kappa_mode = KappaMode::analytic;
    else if (mode == "calibrated") c.kappa_mode = KappaMode::calibrated;
    else throw ConfigError("kappa_mode", "expected \"analytic\" or \"calibrated\"");
  }
  if (j.contains("calibration_trials")) {
    c.calibration_trials = config_field<int>(j, "calibration_trials");
  }
  if (validate) c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["system"] = to_string(c.system);
  j["sigma_grid"] = c.sigma_grid;
  j["N_grid"] = c.N_grid;
  j["trials"] = c.trials;
  j["delta"] = c.delta;
  j["sigma_u"] = c.sigma_u;
  j["seed"] = c.seed;
  std::vector<std::string> methods;
  for (SetKind m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  if (c.dof) j["dof"] = *c.dof;
  j["sigma_nominal"] = c.sigma_nominal;
  if (c.system == SystemKind::lti) {
    j["a"] = c.lti.a;
    j["b"] = c.lti.b;
    j["x0"] = c.x0;
  } else {
    j["g_over_l"] = c.pendulum.g_over_l;
    j["d"] = c.pendulum.d;
    j["b"] = c.pendulum.b;
    j["psi0"] = c.psi0;
    j["omega0"] = c.omega0;
  }
  j["noise"] = c.noise;
  j["kappa_mode"] = c.kappa_mode == KappaMode::analytic ? "analytic" : "calibrated";
  j["calibration_trials"] = c.calibration_trials;
  return j;
}

// ---------------------------------------------------------------------------

struct MonteCarloRecord {
  SetKind method = SetKind::stochastic_sme;
  double sigma = 1.0;
  Index N = 0;
  int trial = 0;
  double volume = 0.0;
  double radius_sq = std::numeric_limits<double>::quiet_NaN();  // NaN when empty
  bool empty = false;
  bool contains_true = false;
  double ols_error_sq = 0.0;
};

inline bool record_key_less(const MonteCarloRecord& a, const MonteCarloRecord& b) {
  return std::tuple(static_cast<int>(a.method), a.sigma, a.N, a.trial) <
         std::tuple(static_cast<int>(b.method), b.sigma, b.N, b.trial);
}

/// Raw (unscaled) trajectory of length max(N_grid) for one (sigma, trial).
/// Inputs and the standardized noise depend only on (seed, trial), so every
/// sigma and every method in a trial sees the same random draws.
inline TrajectoryData trial_trajectory(const ExperimentConfig& c, double sigma, int trial) {
  const Index n = c.N_grid.back();
  const auto t = static_cast<std::uint64_t>(trial);
  Rng input_rng = make_stream(c.seed, {t, 0});
  std::normal_distribution<double> input_dist(0.0, c.sigma_u);
  std::vector<double> inputs(static_cast<std::size_t>(n));
  for (double& u : inputs) u = input_dist(input_rng);

  NoiseModel model = c.noise.whitened();
  model.sigma = sigma;
  const Matrix w = sample_noise(model, 1, n, derive_seed(c.seed, {t, 1}));
  if (c.system == SystemKind::lti) return simulate_lti(c.lti, inputs, w, c.x0);
  return simulate_pendulum(c.pendulum, inputs, w, c.psi0, c.omega0);
}

/// FNV-1a over the bytes of X and Z.
inline std::uint64_t trajectory_fingerprint(const TrajectoryData& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(d.X);
  mix(d.Z);
  return h;
}

/// kappa used for each entry of N_grid.
inline std::vector<double> experiment_kappas(const ExperimentConfig& c) {
  std::vector<double> out;
  for (Index n : c.N_grid) {
    if (c.kappa_mode == KappaMode::analytic) {
      out.push_back(kappa_delta(c.delta, 1, *c.noise.c1, *c.noise.c2));
    } else {
      out.push_back(calibrate_kappa(c.noise, 1, n, c.delta, c.calibration_trials,
                                    derive_seed(c.seed, {0xca11b, static_cast<std::uint64_t>(n)})));
    }
  }
  return out;
}

/// Builds one set and evaluates it against theta*.
inline MonteCarloRecord evaluate_method(SetKind method, const TrajectoryData& data, double kappa,
                                        const ExperimentConfig& c, const Matrix& theta_star) {
  EllipsoidalParamSet set;
  switch (method) {
    case SetKind::stochastic_sme: set = build_stochastic_set(data, kappa); break;
    case SetKind::noise_filtered: set = build_noise_filtered_set(data, kappa); break;
    case SetKind::chi2: set = build_chi2_set(data, c.delta, c.chi2_dof()); break;
  }
  MonteCarloRecord r;
  r.method = method;
  r.N = data.N();
  r.empty = is_empty(set);
  r.ols_error_sq = (set.center - theta_star).squaredNorm();
  if (!r.empty) {
    r.volume = set_volume(set);
    r.radius_sq = radius_sq(set);
    r.contains_true = is_member(set, theta_star);
  }
  return r;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// One record per (method, sigma, N, trial), sorted by that key.
inline std::vector<MonteCarloRecord> run_monte_carlo(const ExperimentConfig& c,
                                                     unsigned threads = 0) {
  c.validate();
  const std::vector<double> kappas = experiment_kappas(c);
  const Matrix theta_star = c.theta_star();
  const std::size_t n_sigma = c.sigma_grid.size();
  const std::size_t n_items = n_sigma * static_cast<std::size_t>(c.trials);
  const std::size_t per_item = c.N_grid.size() * c.methods.size();
  std::vector<MonteCarloRecord> records(n_items * per_item);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t item = next++; item < n_items; item = next++) {
      try {
        const double sigma = c.sigma_grid[item % n_sigma];
        const int trial = static_cast<int>(item / n_sigma);
        TrajectoryData data = trial_trajectory(c, sigma, trial);
        if (c.sigma_nominal != 1.0) data = rescale_isotropic(data, c.sigma_nominal, RescaleMode::joint);
        std::size_t slot = item * per_item;
        for (std::size_t k = 0; k < c.N_grid.size(); ++k) {
          const TrajectoryData prefix = data.prefix(c.N_grid[k]);
          for (SetKind m : c.methods) {
            MonteCarloRecord r = evaluate_method(m, prefix, kappas[k], c, theta_star);
            r.sigma = sigma;
            r.trial = trial;
            records[slot++] = r;
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_items;
      }
    }
  };
  const unsigned n_threads =
      std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(1, n_items)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::sort(records.begin(), records.end(), record_key_less);
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace detail {

inline bool same_sigma(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace detail

inline std::vector<MonteCarloRecord> select_records(const std::vector<MonteCarloRecord>& records,
                                                    SetKind method, double sigma, Index N) {
  std::vector<MonteCarloRecord> out;
  for (const auto& r : records) {
    if (r.method == method && r.N == N && detail::same_sigma(r.sigma, sigma)) out.push_back(r);
  }
  return out;
}

/// Fraction of matching records whose set contains theta*.
inline double empirical_coverage(const std::vector<MonteCarloRecord>& records, SetKind method,
                                 double sigma, Index N) {
  const auto sel = select_records(records, method, sigma, N);
  if (sel.empty()) throw std::invalid_argument("empirical_coverage: no matching records");
  const auto hits = std::count_if(sel.begin(), sel.end(), [](const auto& r) { return r.contains_true; });
  return static_cast<double>(hits) / static_cast<double>(sel.size());
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

/// Least-squares line through (ln N, ln volume).
inline SlopeFit fit_loglog_slope(const std::vector<double>& n_values,
                                 const std::vector<double>& volumes) {
  if (n_values.size() != volumes.size()) {
    throw std::invalid_argument("fit_loglog_slope: length mismatch");
  }
  if (n_values.size() < 3) throw std::invalid_argument("fit_loglog_slope: need at least 3 points");
  const std::size_t k = n_values.size();
  std::vector<double> x(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(n_values[i] > 0.0)) throw std::invalid_argument("fit_loglog_slope: N must be positive");
    if (!(volumes[i] > 0.0)) {
      throw std::invalid_argument("fit_loglog_slope: volumes must be positive");
    }
    x[i] = std::log(n_values[i]);
    y[i] = std::log(volumes[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_loglog_slope: N values must not all be equal");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  return f;
}

/// Statistics of one (method, sigma, N) group. Volume statistics exclude
/// empty sets; the empty fraction is reported separately.
struct GroupStats {
  SetKind method = SetKind::stochastic_sme;
  double sigma = 1.0;
  Index N = 0;
  std::size_t count = 0;
  std::size_t nonempty = 0;
  double mean_volume = std::numeric_limits<double>::quiet_NaN();
  double empty_fraction = 0.0;
  double coverage = 0.0;
  double median_radius_sq = std::numeric_limits<double>::quiet_NaN();
  double median_ols_error_sq = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<GroupStats> summarize(const std::vector<MonteCarloRecord>& records) {
  std::map<std::tuple<int, double, Index>, std::vector<const MonteCarloRecord*>> groups;
  for (const auto& r : records) groups[{static_cast<int>(r.method), r.sigma, r.N}].push_back(&r);
  std::vector<GroupStats> out;
  for (const auto& [key, rs] : groups) {
    GroupStats g;
    g.method = static_cast<SetKind>(std::get<0>(key));
    g.sigma = std::get<1>(key);
    g.N = std::get<2>(key);
    g.count = rs.size();
    double vol_sum = 0.0;
    std::size_t covered = 0;
    std::vector<double> rsq, ols;
    for (const auto* r : rs) {
      if (!r->empty) {
        ++g.nonempty;
        vol_sum += r->volume;
        rsq.push_back(r->radius_sq);
      }
      if (r->contains_true) ++covered;
      ols.push_back(r->ols_error_sq);
    }
    if (g.nonempty > 0) g.mean_volume = vol_sum / static_cast<double>(g.nonempty);
    g.empty_fraction = static_cast<double>(g.count - g.nonempty) / static_cast<double>(g.count);
    g.coverage = static_cast<double>(covered) / static_cast<double>(g.count);
    g.median_radius_sq = detail::median(rsq);
    g.median_ols_error_sq = detail::median(ols);
    out.push_back(g);
  }
  return out;
}

/// Mean-volume slope of one (method, sigma) series over N in [n_min, n_max];
/// nullopt when fewer than three nonempty points fall in range.
inline std::optional<SlopeFit> volume_slope(const std::vector<GroupStats>& stats, SetKind method,
                                            double sigma, Index n_min = 0,
                                            Index n_max = std::numeric_limits<Index>::max()) {
  std::vector<double> ns, vs;
  for (const auto& g : stats) {
    if (g.method != method || !detail::same_sigma(g.sigma, sigma)) continue;
    if (g.N < n_min || g.N > n_max || !(g.mean_volume > 0.0)) continue;
    ns.push_back(static_cast<double>(g.N));
    vs.push_back(g.mean_volume);
  }
  if (ns.size() < 3) return std::nullopt;
  return fit_loglog_slope(ns, vs);
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json slope_json(const std::optional<SlopeFit>& f) {
  if (!f) return nullptr;
  return {{"slope", f->slope}, {"intercept", f->intercept}, {"r_squared", f->r_squared}};
}

}  // namespace detail

/// Per-group statistics plus per-(method, sigma) slope fits over the full
/// grid and over its upper decade.
inline nlohmann::json summary_json(const std::vector<MonteCarloRecord>& records) {
  const auto stats = summarize(records);
  nlohmann::json groups = nlohmann::json::array();
  std::map<std::pair<int, double>, Index> max_n;
  for (const auto& g : stats) {
    groups.push_back({{"method", to_string(g.method)},
                      {"sigma", g.sigma},
                      {"N", g.N},
                      {"trials", g.count},
                      {"mean_volume", detail::number_or_null(g.mean_volume)},
                      {"empty_fraction", g.empty_fraction},
                      {"coverage", g.coverage},
                      {"median_radius_sq", detail::number_or_null(g.median_radius_sq)},
                      {"median_ols_error_sq", detail::number_or_null(g.median_ols_error_sq)}});
    auto& m = max_n[{static_cast<int>(g.method), g.sigma}];
    m = std::max(m, g.N);
  }
  nlohmann::json slopes = nlohmann::json::array();
  for (const auto& [key, n_top] : max_n) {
    const auto method = static_cast<SetKind>(key.first);
    const auto lower = static_cast<Index>(std::ceil(static_cast<double>(n_top) / 10.0 - 1e-9));
    slopes.push_back({{"method", to_string(method)},
                      {"sigma", key.second},
                      {"full", detail::slope_json(volume_slope(stats, method, key.second))},
                      {"upper_decade",
                       detail::slope_json(volume_slope(stats, method, key.second, lower, n_top))}});
  }
  return {{"groups", groups}, {"slopes", slopes}};
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvHeader =
    "method,sigma,N,trial,volume,radius_sq,empty,contains_true,ols_error_sq";

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline double parse_real(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<MonteCarloRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << to_string(r.method) << ',' << detail::format_real(r.sigma) << ',' << r.N << ','
       << r.trial << ',' << detail::format_real(r.volume) << ','
       << detail::format_real(r.radius_sq) << ',' << (r.empty ? 1 : 0) << ','
       << (r.contains_true ? 1 : 0) << ',' << detail::format_real(r.ols_error_sq) << '\n';
  }
}

inline void export_csv(const std::vector<MonteCarloRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(out, records);
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline std::vector<MonteCarloRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) {
    throw std::invalid_argument("csv: header must be '" + std::string(kCsvHeader) + "'");
  }
  std::vector<MonteCarloRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected 9 fields");
    }
    try {
      MonteCarloRecord r;
      r.method = parse_set_kind(f[0]);
      r.sigma = detail::parse_real(f[1]);
      r.N = std::stoll(f[2]);
      r.trial = std::stoi(f[3]);
      r.volume = detail::parse_real(f[4]);
      r.radius_sq = detail::parse_real(f[5]);
      r.empty = f[6] == "1";
      r.contains_true = f[7] == "1";
      r.ols_error_sq = detail::parse_real(f[8]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<MonteCarloRecord> import_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_csv(in);
}

}  // namespace smelab
