#pragma once

// Shared synthetic fixtures: exposure series shaped like the historical
// consumption curves (paint front-loaded and zeroed from 1980, gasoline
// starting 1924 with a plateau and late decline).

#include <utility>
#include <vector>

#include "soillead/dataset.hpp"
#include "soillead/series.hpp"
#include "soillead/simulator.hpp"

namespace fixtures {

inline constexpr int kFirstYear = 1902;
inline constexpr int kMeasurementYear = 1986;

inline double paint_amount(int y) {
  if (y >= 1980) return 0.0;
  if (y <= 1929) return 0.10;
  if (y <= 1949) return 0.10 - 0.09 * static_cast<double>(y - 1930) / 19.0;
  return 0.01;
}

inline double gas_amount(int y) {
  if (y <= 1923) return 0.0;
  if (y <= 1929) return 0.10 * static_cast<double>(y - 1923) / 7.0;
  if (y <= 1975) return 0.10;
  if (y <= 1985) return 0.10 * static_cast<double>(1986 - y) / 11.0;
  return 0.0;
}

inline soillead::YearlySeries paint_series() {
  std::vector<std::optional<double>> amounts;
  for (int y = kFirstYear; y <= kMeasurementYear; ++y) amounts.emplace_back(paint_amount(y));
  return soillead::YearlySeries(kFirstYear, std::move(amounts));
}

inline soillead::YearlySeries gas_series() {
  std::vector<std::optional<double>> amounts;
  for (int y = kFirstYear; y <= kMeasurementYear; ++y) amounts.emplace_back(gas_amount(y));
  return soillead::YearlySeries(kFirstYear, std::move(amounts));
}

inline soillead::CumulativeExposure paint_exposure() {
  return soillead::cumulate(paint_series(), kMeasurementYear, kFirstYear);
}

inline soillead::CumulativeExposure gas_exposure() {
  return soillead::cumulate(gas_series(), kMeasurementYear, kFirstYear);
}

inline std::vector<std::pair<int, double>> uniform_year_weights() {
  std::vector<std::pair<int, double>> w;
  for (int y = kFirstYear; y <= kMeasurementYear; ++y) w.emplace_back(y, 1.0);
  return w;
}

/// Parameter-recovery configuration: theta = (15, 200, 10), sigma = 1.
inline soillead::SimConfig recovery_config(std::uint64_t seed, int n = 300) {
  return soillead::SimConfig{
      soillead::Theta{15.0, 200.0, 10.0}, 1.0,           paint_exposure(),
      gas_exposure(),                     uniform_year_weights(),
      n,                                  seed,
  };
}

inline std::vector<soillead::DesignPoint> simulate_points(
    const soillead::SimConfig& sim, const soillead::ErrorConfig* err = nullptr) {
  auto samples = soillead::simulate(sim, err);
  auto ds = soillead::join_samples(samples, sim.paint, sim.gas);
  return ds.points;
}

}  // namespace fixtures
