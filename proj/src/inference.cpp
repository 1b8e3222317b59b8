#include "soillead/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

namespace soillead {

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

// portable bounded uniform, independent of std::uniform_int_distribution
std::size_t bounded_uniform(std::mt19937_64& rng, std::size_t n) {
  std::uint64_t threshold = (~std::uint64_t{0} - n + 1) % n;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return static_cast<std::size_t>(r % n);
  }
}

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> leverage_from_jacobian(const Eigen::MatrixXd& J) {
  Eigen::MatrixXd pinv = (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> h(static_cast<std::size_t>(J.rows()));
  for (Eigen::Index i = 0; i < J.rows(); ++i) {
    h[static_cast<std::size_t>(i)] = (J.row(i) * pinv * J.row(i).transpose())(0, 0);
  }
  return h;
}

}  // namespace

AsymptoticSe asymptotic_se(const FitResult& fit, bool df_corrected) {
  if (!fit.cov_theta.allFinite()) {
    throw std::runtime_error("asymptotic_se: singular J'J, covariance undefined");
  }
  double scale = df_corrected && fit.sigma2 > 0.0 ? fit.sigma2_df / fit.sigma2 : 1.0;
  AsymptoticSe out;
  for (int k = 0; k < 3; ++k) {
    out.se[static_cast<std::size_t>(k)] = std::sqrt(scale * fit.cov_theta(k, k));
    out.at_bound[static_cast<std::size_t>(k)] =
        std::find(fit.active_bounds.begin(), fit.active_bounds.end(), k) !=
        fit.active_bounds.end();
  }
  return out;
}

std::vector<double> bootstrap_response(const FitResult& fit,
                                       const std::vector<DesignPoint>& data,
                                       std::uint64_t seed, int replicate,
                                       bool studentized) {
  const std::size_t n = data.size();
  std::vector<double> pool = fit.residuals;
  if (studentized) {
    auto h = leverage_from_jacobian(fit.jacobian);
    for (std::size_t i = 0; i < n; ++i) {
      double d = 1.0 - h[i];
      pool[i] = d > 0.0 ? pool[i] / std::sqrt(d) : pool[i];
    }
  }
  std::mt19937_64 rng(derive_stream(seed, static_cast<std::uint64_t>(replicate)));
  std::vector<double> response(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = data[i].log_concentration - fit.residuals[i];
    response[i] = mu + pool[bounded_uniform(rng, n)];
  }
  return response;
}

BootstrapResult residual_bootstrap(const FitResult& fit,
                                   const std::vector<DesignPoint>& data,
                                   const BootstrapOptions& options,
                                   const FitOptions& fit_options) {
  if (options.replicates < 1) {
    throw std::invalid_argument("residual_bootstrap: need at least one replicate");
  }
  BootstrapResult result;
  result.seed = options.seed;
  result.requested = options.replicates;
  result.studentized = options.studentized;

  std::vector<DesignPoint> rep_data = data;
  for (int b = 0; b < options.replicates; ++b) {
    auto response =
        bootstrap_response(fit, data, options.seed, b, options.studentized);
    for (std::size_t i = 0; i < data.size(); ++i) {
      rep_data[i].log_concentration = response[i];
    }
    try {
      // restart from the original optimum: same fixed point, far fewer steps
      ConstrainedFit cf = minimize_rss(rep_data, fit.theta, std::nullopt, fit_options);
      if (!cf.converged) {
        ++result.failures;
        continue;
      }
      result.replicates.push_back(
          {b, cf.theta, cf.rss / static_cast<double>(data.size())});
    } catch (const FitError&) {
      ++result.failures;
    }
  }
  if (static_cast<double>(result.failures) >
      options.max_failure_fraction * static_cast<double>(options.replicates)) {
    throw std::runtime_error("residual_bootstrap: " +
                             std::to_string(result.failures) + " of " +
                             std::to_string(options.replicates) +
                             " replicates failed to converge");
  }
  for (int k = 0; k < 3; ++k) {
    std::vector<double> vals;
    vals.reserve(result.replicates.size());
    for (const auto& rep : result.replicates) vals.push_back(rep.theta[k]);
    result.se_theta[static_cast<std::size_t>(k)] = sample_sd(vals);
  }
  return result;
}

namespace {

struct Profiler {
  const std::vector<DesignPoint>& data;
  const FitResult& fit;
  const FitOptions& fit_options;
  int k;
  std::vector<std::pair<double, double>> trace;

  // likelihood-ratio deviance at theta_k = v, nuisance parameters profiled out
  double deviance(double v) {
    Theta start = fit.theta;
    start[k] = v;
    ConstrainedFit cf;
    try {
      cf = minimize_rss(data, start, k, fit_options);
    } catch (const FitError&) {
      // pinned value leaves no feasible mean (some eta <= 0): likelihood -inf
      return std::numeric_limits<double>::infinity();
    }
    double n = static_cast<double>(data.size());
    trace.emplace_back(v, profiled_log_likelihood(cf.rss, data.size()));
    if (cf.rss <= 0.0 || fit.rss <= 0.0) return 0.0;
    return std::max(0.0, n * std::log(cf.rss / fit.rss));
  }
};

}  // namespace

ProfileInterval profile_interval(const FitResult& fit,
                                 const std::vector<DesignPoint>& data, int parameter,
                                 const ProfileOptions& options,
                                 const FitOptions& fit_options) {
  if (parameter < 0 || parameter > 2) {
    throw std::invalid_argument("profile_interval: parameter index out of range");
  }
  boost::math::chi_squared chi2(1);
  const double cutoff = boost::math::quantile(chi2, options.level);
  const double est = fit.theta[parameter];

  Profiler prof{data, fit, fit_options, parameter, {}};
  ProfileInterval out;
  out.parameter = parameter;
  out.level = options.level;

  double scale = std::max({est, std::sqrt(std::max(fit.cov_theta(parameter, parameter), 0.0)),
                           1e-6});
  double tol = options.tol_relative * scale;

  // lower endpoint
  if (est <= 0.0 || prof.deviance(0.0) <= cutoff) {
    out.lower = 0.0;
    out.lower_clamped = true;
  } else {
    double lo = 0.0, hi = est;
    while (hi - lo > tol) {
      double mid = 0.5 * (lo + hi);
      if (prof.deviance(mid) > cutoff) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out.lower = 0.5 * (lo + hi);
  }

  // upper endpoint: bracket by doubling, then bisect
  const double cap = options.cap_multiplier * std::max(est, scale);
  double step = scale;
  double lo = est, hi = est + step;
  bool bracketed = false;
  while (hi <= cap) {
    if (prof.deviance(hi) > cutoff) {
      bracketed = true;
      break;
    }
    lo = hi;
    step *= 2.0;
    hi = est + step;
  }
  if (!bracketed) {
    out.upper = cap;
    out.upper_open = true;
  } else {
    while (hi - lo > tol) {
      double mid = 0.5 * (lo + hi);
      if (prof.deviance(mid) > cutoff) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    out.upper = 0.5 * (lo + hi);
  }

  prof.trace.emplace_back(est, profiled_log_likelihood(fit.rss, data.size()));
  std::sort(prof.trace.begin(), prof.trace.end());
  prof.trace.erase(std::unique(prof.trace.begin(), prof.trace.end(),
                               [](const auto& a, const auto& b) {
                                 return a.first == b.first;
                               }),
                   prof.trace.end());
  out.trace = std::move(prof.trace);
  return out;
}

std::vector<std::pair<double, double>> confidence_curve_trace(
    const FitResult& fit, const std::vector<DesignPoint>& data, int parameter,
    const std::vector<double>& grid, const FitOptions& fit_options) {
  Profiler prof{data, fit, fit_options, parameter, {}};
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double v : grid) {
    double dev = prof.deviance(v);
    double s = v < fit.theta[parameter] ? -1.0 : (v > fit.theta[parameter] ? 1.0 : 0.0);
    out.emplace_back(v, s * std::sqrt(dev));
  }
  return out;
}

void write_trace_csv(const std::vector<std::pair<double, double>>& trace,
                     const std::string& path, const std::string& value_header,
                     const std::string& y_header) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write trace file: " + path);
  f.precision(17);
  f << value_header << "," << y_header << "\n";
  for (const auto& [v, y] : trace) f << v << "," << y << "\n";
}

nlohmann::json BootstrapResult::to_json() const {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : replicates) {
    reps.push_back({{"index", rep.index},
                    {"theta",
                     {{"background", rep.theta.background},
                      {"paint_rate", rep.theta.paint_rate},
                      {"gas_rate", rep.theta.gas_rate}}},
                    {"sigma2", rep.sigma2}});
  }
  return nlohmann::json{{"seed", seed},
                        {"requested", requested},
                        {"failures", failures},
                        {"se_theta",
                         {{"background", se_theta[0]},
                          {"paint_rate", se_theta[1]},
                          {"gas_rate", se_theta[2]}}},
                        {"replicates", reps}};
}

nlohmann::json ProfileInterval::to_json() const {
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& [v, ll] : trace) tr.push_back({v, ll});
  return nlohmann::json{{"parameter", parameter}, {"level", level},
                        {"lower", lower},         {"upper", upper},
                        {"lower_clamped", lower_clamped},
                        {"upper_open", upper_open},
                        {"trace", tr}};
}

}  // namespace soillead
