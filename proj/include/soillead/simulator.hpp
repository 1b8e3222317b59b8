#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "soillead/dataset.hpp"
#include "soillead/model.hpp"
#include "soillead/series.hpp"

namespace soillead {

struct SimConfig {
  Theta theta;
  double sigma = 1.0;  // log-scale noise SD
  CumulativeExposure paint;
  CumulativeExposure gas;
  std::vector<std::pair<int, double>> year_weights;  // (year built, weight)
  int n = 0;
  std::uint64_t seed = 0;
};

/// Measurement-error / random-effects extension. epsilon and delta are
/// lognormal with the given mean and SD (support on (0, inf)).
struct ErrorConfig {
  double epsilon_mean = 1.0;
  double epsilon_sd = 0.0;
  bool shared = false;    // one epsilon series shared by all structures
  double delta_sd = 0.0;  // per-structure yearly loss multiplier; 0 = off
};

/// Generate samples under the base model, or the extension when err != nullptr.
/// Deterministic per-sample streams derived from (seed, sample index).
std::vector<SampleRecord> simulate(const SimConfig& sim,
                                   const ErrorConfig* err = nullptr);

struct DeltaMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Moments of the weighted error average Delta over the window given by the
/// whole series: mean E(eps), variance (c^2 + 1) sigma_eps^2 / A.
DeltaMoments delta_moments(const YearlySeries& window, const ErrorConfig& err);

/// Cov(Delta_{y'}, Delta_y) for suffix windows [y..Y] and [y'..Y], y' < y,
/// under shared errors: Var(Delta_y) * S_y / S_{y'} with S the window sums.
double delta_covariance(const YearlySeries& series, int y_prime, int y,
                        const ErrorConfig& err);

/// Yearly amounts recovered from tail sums: s_y = C_y - C_{y+1}, s_Y = C_Y.
YearlySeries yearly_from_cumulative(const CumulativeExposure& exposure);

/// One draw of Delta over the window (test oracle hook); rng must be a
/// dedicated stream.
double draw_delta(const YearlySeries& window, const ErrorConfig& err,
                  const std::vector<double>& epsilon,
                  const std::vector<double>& delta);

/// Lognormal parameterized by mean/SD; z is a standard normal draw.
double lognormal_from_mean_sd(double mean, double sd, double z);

/// Deterministic uniform and normal draws (self-contained, not
/// implementation-defined like the std distributions).
double uniform01(std::mt19937_64& rng);
double standard_normal(std::mt19937_64& rng);

}  // namespace soillead
