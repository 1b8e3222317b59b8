#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "soillead/estimator.hpp"

namespace soillead {

struct BootstrapReplicate {
  int index = 0;  // replicate number, RNG stream id
  Theta theta;
  double sigma2 = 0.0;
};

struct BootstrapResult {
  std::vector<BootstrapReplicate> replicates;  // successes only
  std::array<double, 3> se_theta{};
  std::uint64_t seed = 0;
  int requested = 0;
  int failures = 0;
  bool studentized = false;

  nlohmann::json to_json() const;
};

struct BootstrapOptions {
  int replicates = 100;
  std::uint64_t seed = 0;
  bool studentized = false;  // resample studentized residuals instead of raw
  double max_failure_fraction = 0.2;
};

struct AsymptoticSe {
  std::array<double, 3> se{};
  std::array<bool, 3> at_bound{};  // SE unreliable when the estimate sits at 0
};

/// sqrt of the diagonal of sigma2 * (J'J)^-1; df-corrected variance selectable.
AsymptoticSe asymptotic_se(const FitResult& fit, bool df_corrected = false);

/// Deterministic per-replicate resampled response (mu_log + resampled residual).
std::vector<double> bootstrap_response(const FitResult& fit,
                                       const std::vector<DesignPoint>& data,
                                       std::uint64_t seed, int replicate,
                                       bool studentized = false);

BootstrapResult residual_bootstrap(const FitResult& fit,
                                   const std::vector<DesignPoint>& data,
                                   const BootstrapOptions& options = {},
                                   const FitOptions& fit_options = {});

struct ProfileInterval {
  int parameter = 0;
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
  bool lower_clamped = false;  // likelihood never crosses the cutoff down to 0
  bool upper_open = false;     // not bracketed below the cap
  std::vector<std::pair<double, double>> trace;  // (theta_k, profiled loglik)

  nlohmann::json to_json() const;
};

struct ProfileOptions {
  double level = 0.95;
  double cap_multiplier = 100.0;  // upper bracket cap, times the point estimate
  double tol_relative = 1e-6;
};

ProfileInterval profile_interval(const FitResult& fit,
                                 const std::vector<DesignPoint>& data, int parameter,
                                 const ProfileOptions& options = {},
                                 const FitOptions& fit_options = {});

/// Signed sqrt likelihood-ratio deviance over a user grid of parameter values.
std::vector<std::pair<double, double>> confidence_curve_trace(
    const FitResult& fit, const std::vector<DesignPoint>& data, int parameter,
    const std::vector<double>& grid, const FitOptions& fit_options = {});

void write_trace_csv(const std::vector<std::pair<double, double>>& trace,
                     const std::string& path, const std::string& value_header,
                     const std::string& y_header);

/// splitmix64-style stream derivation; replicate streams are independent of
/// execution order.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index);

}  // namespace soillead
