#pragma once

#include <array>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "soillead/inference.hpp"
#include "soillead/series.hpp"

namespace soillead {

/// Per-year estimated fractional contributions with optional bootstrap bands.
struct ApportionmentCurve {
  std::vector<int> years;
  std::vector<double> f_background;
  std::vector<double> f_paint;
  std::vector<double> f_gas;
  std::vector<double> eta;  // linear predictor, ppm
  bool has_bands = false;
  std::vector<double> band_background;  // per-year SD over bootstrap replicates
  std::vector<double> band_paint;
  std::vector<double> band_gas;

  nlohmann::json to_json() const;
};

struct Crossing {
  int component_a = 0;  // 0 = background, 1 = paint, 2 = gas
  int component_b = 0;
  double year = 0.0;    // linear interpolation between yearly grid points
  double fraction = 0.0;  // shared fraction at the crossing
};

/// Fractions (background, paint, gas) of the estimated mean concentration.
/// The lognormal factor exp(sigma2/2) cancels and never enters.
std::array<double, 3> efc(const Theta& theta, double paint_exposure,
                          double gas_exposure);

ApportionmentCurve efc_curve(const FitResult& fit, const CumulativeExposure& paint,
                             const CumulativeExposure& gas,
                             const BootstrapResult* bootstrap = nullptr);

std::vector<Crossing> crossing_years(const ApportionmentCurve& curve);

/// CSV: year,f_background,f_paint,f_gas,band_b,band_p,band_g,eta_ppm
/// (bands empty when absent). Display clipping to [0,1] is applied here only.
void write_curve_csv(const ApportionmentCurve& curve, const std::string& path);

}  // namespace soillead
