// sme-lab: simulate benchmark systems, build uncertainty sets, and run the
// Monte Carlo experiments.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or config.

#include "smelab/smelab.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using smelab::ConfigError;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExperimentArgs {
  std::string config_path;
  std::string out_path;
  std::string summary_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> sigma;
  std::optional<double> delta;
  std::optional<unsigned> threads;
};

unsigned thread_count(const std::optional<unsigned>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SME_LAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v < 0) throw std::invalid_argument("negative");
      return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      throw UsageError("invalid SME_LAB_THREADS: '" + std::string(env) + "'");
    }
  }
  return 0;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

int run_experiment(smelab::SystemKind system, const ExperimentArgs& args) {
  nlohmann::json j = nlohmann::json::object();
  if (!args.config_path.empty()) j = read_json_file(args.config_path);
  if (j.is_object() && j.contains("system") &&
      smelab::parse_system(j.at("system").get<std::string>()) != system) {
    throw ConfigError("system", "config is for '" + j.at("system").get<std::string>() +
                                    "' but the subcommand is '" + smelab::to_string(system) + "'");
  }
  if (j.is_object()) j["system"] = smelab::to_string(system);
  smelab::ExperimentConfig cfg = smelab::config_from_json(j, false);
  if (args.seed) cfg.seed = *args.seed;
  if (args.trials) cfg.trials = *args.trials;
  if (args.sigma) cfg.sigma_grid = {*args.sigma};
  if (args.delta) cfg.delta = *args.delta;
  cfg.validate();

  const auto records = smelab::run_monte_carlo(cfg, thread_count(args.threads));
  const std::string out = args.out_path.empty() ? smelab::to_string(system) + ".csv" : args.out_path;
  smelab::export_csv(records, out);

  std::string summary = args.summary_path;
  if (summary.empty()) {
    const auto dot = out.rfind('.');
    summary = (dot == std::string::npos ? out : out.substr(0, dot)) + ".summary.json";
  }
  nlohmann::json s = smelab::summary_json(records);
  s["config"] = smelab::config_to_json(cfg);
  write_text(summary, s.dump(2) + "\n");
  std::cerr << "wrote " << records.size() << " records to " << out << " and summary to " << summary
            << "\n";
  return 0;
}

/// Trajectory CSV with a header naming columns x and u; row t holds (x_t, u_t).
smelab::TrajectoryData read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open trajectory '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw UsageError("trajectory '" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      header.push_back(cell);
    }
  }
  const auto col = [&](const char* name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw UsageError("trajectory '" + path + "' has no column '" + name + "'");
  };
  const std::size_t ix = col("x");
  const std::size_t iu = col("u");
  std::vector<double> xs, us;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() < header.size()) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": too few columns");
    }
    try {
      xs.push_back(std::stod(cells[ix]));
      us.push_back(std::stod(cells[iu]));
    } catch (const std::exception&) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  if (xs.size() < 2) throw UsageError("trajectory '" + path + "' needs at least two rows");
  const auto n = static_cast<smelab::Index>(xs.size() - 1);
  smelab::TrajectoryData d{smelab::Matrix(1, n), smelab::Matrix(2, n), std::nullopt, std::nullopt};
  for (smelab::Index t = 0; t < n; ++t) {
    d.Z(0, t) = xs[static_cast<std::size_t>(t)];
    d.Z(1, t) = us[static_cast<std::size_t>(t)];
    d.X(0, t) = xs[static_cast<std::size_t>(t) + 1];
  }
  return d;
}

struct EstimateArgs {
  std::string input;
  std::string method = "stochastic-sme";
  double delta = 0.05;
  std::optional<double> kappa;
  double sigma = 1.0;
  std::optional<int> dof;
};

int run_estimate(const EstimateArgs& args) {
  if (!(args.delta > 0.0 && args.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (!(args.sigma > 0.0)) throw ConfigError("sigma", "must be > 0");
  if (args.kappa && !(*args.kappa >= 0.0)) throw ConfigError("kappa", "must be >= 0");
  if (args.dof && *args.dof < 1) throw ConfigError("dof", "must be >= 1");
  smelab::SetKind kind;
  try {
    kind = smelab::parse_set_kind(args.method);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("method", e.what());
  }

  smelab::TrajectoryData data = read_trajectory(args.input);
  if (args.sigma != 1.0) data = smelab::rescale_isotropic(data, args.sigma, smelab::RescaleMode::joint);
  const double kappa = args.kappa.value_or(smelab::kappa_delta(args.delta, 1, 1.0, 0.5));

  smelab::EllipsoidalParamSet set;
  switch (kind) {
    case smelab::SetKind::stochastic_sme: set = smelab::build_stochastic_set(data, kappa); break;
    case smelab::SetKind::noise_filtered: set = smelab::build_noise_filtered_set(data, kappa); break;
    case smelab::SetKind::chi2:
      set = smelab::build_chi2_set(data, args.delta, args.dof.value_or(static_cast<int>(data.n_z())));
      break;
  }
  const bool empty = smelab::is_empty(set);
  const smelab::Vector spectrum = smelab::symmetric_eigenvalues(set.radius);
  nlohmann::json out;
  out["method"] = smelab::to_string(set.kind);
  out["N"] = set.N;
  out["kappa"] = kappa;
  out["center"] = std::vector<double>(set.center.data(), set.center.data() + set.center.size());
  out["radius_spectrum"] = std::vector<double>(spectrum.data(), spectrum.data() + spectrum.size());
  out["empty"] = empty;
  out["volume"] = smelab::set_volume(set);
  out["radius_sq"] = empty ? nlohmann::json(nullptr) : nlohmann::json(smelab::radius_sq(set));
  out["set"] = set;
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct CalibrateArgs {
  std::string family = "gaussian";
  int n_x = 1;
  long long n = 1000;
  double delta = 0.05;
  int trials = 2000;
  std::uint64_t seed = 0;
};

int run_calibrate(const CalibrateArgs& args) {
  smelab::NoiseModel model;
  try {
    model.family = smelab::parse_noise_family(args.family);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("family", e.what());
  }
  if (args.n_x < 1) throw ConfigError("nx", "must be >= 1");
  if (args.n < 1) throw ConfigError("N", "must be >= 1");
  if (!(args.delta > 0.0 && args.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (args.trials < 100) throw ConfigError("trials", "must be >= 100");
  const double kappa_hat = smelab::calibrate_kappa(model, args.n_x, args.n, args.delta, args.trials, args.seed);
  nlohmann::json out{{"family", args.family}, {"n_x", args.n_x},   {"N", args.n},
                     {"delta", args.delta},   {"trials", args.trials}, {"kappa_hat", kappa_hat}};
  if (model.family == smelab::NoiseFamily::gaussian) {
    out["kappa_analytic"] = smelab::kappa_delta(args.delta, args.n_x, 1.0, 0.5);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

void add_experiment_options(CLI::App* sub, ExperimentArgs& a) {
  sub->add_option("--config", a.config_path, "experiment config (JSON)");
  sub->add_option("--out", a.out_path, "CSV output path");
  sub->add_option("--summary", a.summary_path, "JSON summary path (default: <out>.summary.json)");
  sub->add_option("--seed", a.seed, "master seed");
  sub->add_option("--trials", a.trials, "Monte Carlo trials per sigma");
  sub->add_option("--sigma", a.sigma, "run a single true noise level");
  sub->add_option("--delta", a.delta, "failure probability");
  sub->add_option("--threads", a.threads, "worker threads (0: all cores; env SME_LAB_THREADS)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic set-membership estimation lab"};
  app.require_subcommand(1);

  ExperimentArgs lti_args, pend_args;
  auto* lti = app.add_subcommand("lti", "Monte Carlo study on the scalar LTI system");
  add_experiment_options(lti, lti_args);
  auto* pend = app.add_subcommand("pendulum", "Monte Carlo study on the nonlinear pendulum");
  add_experiment_options(pend, pend_args);

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate", "build a set from a trajectory CSV (columns x,u)");
  est->add_option("input", est_args.input, "trajectory CSV")->required();
  est->add_option("--method", est_args.method, "stochastic-sme | noise-filtered | chi2");
  est->add_option("--delta", est_args.delta, "failure probability");
  est->add_option("--kappa", est_args.kappa, "override the analytic kappa");
  est->add_option("--sigma", est_args.sigma, "assumed noise std; data is divided by it");
  est->add_option("--dof", est_args.dof, "chi2 degrees of freedom");

  CalibrateArgs cal_args;
  auto* cal = app.add_subcommand("calibrate", "empirical kappa from simulated noise");
  cal->add_option("--family", cal_args.family, "gaussian | rademacher | uniform-bounded");
  cal->add_option("--nx", cal_args.n_x, "noise dimension");
  cal->add_option("--N", cal_args.n, "sample count");
  cal->add_option("--delta", cal_args.delta, "failure probability");
  cal->add_option("--trials", cal_args.trials, "number of simulated noise matrices");
  cal->add_option("--seed", cal_args.seed, "seed");

  auto* version = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sme-lab: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*version) {
      std::cout << "sme-lab " << SMELAB_VERSION << "\n";
      return 0;
    }
    if (*lti) return run_experiment(smelab::SystemKind::lti, lti_args);
    if (*pend) return run_experiment(smelab::SystemKind::pendulum, pend_args);
    if (*est) return run_estimate(est_args);
    if (*cal) return run_calibrate(cal_args);
  } catch (const std::invalid_argument& e) {
    // ConfigError, UsageError and malformed inputs.
    std::cerr << "sme-lab: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "sme-lab: invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "sme-lab: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
