#include "soillead/apportion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace soillead {

std::array<double, 3> efc(const Theta& theta, double paint_exposure,
                          double gas_exposure) {
  if (!theta.nonnegative()) throw std::invalid_argument("efc: negative theta");
  double pb = theta.background;
  double pp = theta.paint_rate * paint_exposure;
  double pg = theta.gas_rate * gas_exposure;
  double eta = pb + pp + pg;
  if (eta <= 0.0) {
    throw std::domain_error("efc: zero linear predictor, fractions undefined");
  }
  return {pb / eta, pp / eta, pg / eta};
}

ApportionmentCurve efc_curve(const FitResult& fit, const CumulativeExposure& paint,
                             const CumulativeExposure& gas,
                             const BootstrapResult* bootstrap) {
  int y_first = std::max(paint.y_min(), gas.y_min());
  int y_last = std::min(paint.measurement_year(), gas.measurement_year());
  if (y_first > y_last) {
    throw std::invalid_argument("efc_curve: exposure domains do not overlap");
  }
  ApportionmentCurve curve;
  for (int y = y_first; y <= y_last; ++y) {
    double T = paint.value(y);
    double G = gas.value(y);
    auto f = efc(fit.theta, T, G);
    curve.years.push_back(y);
    curve.f_background.push_back(f[0]);
    curve.f_paint.push_back(f[1]);
    curve.f_gas.push_back(f[2]);
    curve.eta.push_back(linear_predictor(fit.theta, {T, G, 0.0, y}));
  }
  if (bootstrap) {
    curve.has_bands = true;
    std::size_t ny = curve.years.size();
    curve.band_background.assign(ny, 0.0);
    curve.band_paint.assign(ny, 0.0);
    curve.band_gas.assign(ny, 0.0);
    const auto& reps = bootstrap->replicates;
    if (reps.size() >= 2) {
      for (std::size_t j = 0; j < ny; ++j) {
        double T = paint.value(curve.years[j]);
        double G = gas.value(curve.years[j]);
        std::array<double, 3> mean{}, m2{};
        std::size_t count = 0;
        for (const auto& rep : reps) {
          auto f = efc(rep.theta, T, G);
          ++count;
          for (int c = 0; c < 3; ++c) {
            double d = f[static_cast<std::size_t>(c)] - mean[static_cast<std::size_t>(c)];
            mean[static_cast<std::size_t>(c)] += d / static_cast<double>(count);
            m2[static_cast<std::size_t>(c)] +=
                d * (f[static_cast<std::size_t>(c)] - mean[static_cast<std::size_t>(c)]);
          }
        }
        double denom = static_cast<double>(count - 1);
        curve.band_background[j] = std::sqrt(m2[0] / denom);
        curve.band_paint[j] = std::sqrt(m2[1] / denom);
        curve.band_gas[j] = std::sqrt(m2[2] / denom);
      }
    }
  }
  return curve;
}

std::vector<Crossing> crossing_years(const ApportionmentCurve& curve) {
  const std::vector<const std::vector<double>*> comps = {
      &curve.f_background, &curve.f_paint, &curve.f_gas};
  std::vector<Crossing> out;
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const auto& fa = *comps[static_cast<std::size_t>(a)];
      const auto& fb = *comps[static_cast<std::size_t>(b)];
      for (std::size_t j = 0; j + 1 < curve.years.size(); ++j) {
        double d0 = fa[j] - fb[j];
        double d1 = fa[j + 1] - fb[j + 1];
        if (d0 == 0.0 && d1 == 0.0) continue;
        if ((d0 <= 0.0 && d1 > 0.0) || (d0 >= 0.0 && d1 < 0.0)) {
          double t = d0 == d1 ? 0.0 : d0 / (d0 - d1);
          double year = static_cast<double>(curve.years[j]) +
                        t * static_cast<double>(curve.years[j + 1] - curve.years[j]);
          double frac = fa[j] + t * (fa[j + 1] - fa[j]);
          out.push_back({a, b, year, frac});
        }
      }
    }
  }
  return out;
}

void write_curve_csv(const ApportionmentCurve& curve, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write curve file: " + path);
  f.precision(17);
  f << "year,f_background,f_paint,f_gas,band_b,band_p,band_g,eta_ppm\n";
  auto clip = [](double x) { return std::clamp(x, 0.0, 1.0); };
  for (std::size_t j = 0; j < curve.years.size(); ++j) {
    f << curve.years[j] << "," << clip(curve.f_background[j]) << ","
      << clip(curve.f_paint[j]) << "," << clip(curve.f_gas[j]) << ",";
    if (curve.has_bands) {
      f << curve.band_background[j] << "," << curve.band_paint[j] << ","
        << curve.band_gas[j];
    } else {
      f << ",,";
    }
    f << "," << curve.eta[j] << "\n";
  }
}

nlohmann::json ApportionmentCurve::to_json() const {
  nlohmann::json j{{"years", years},
                   {"f_background", f_background},
                   {"f_paint", f_paint},
                   {"f_gas", f_gas},
                   {"eta_ppm", eta}};
  if (has_bands) {
    j["band_background"] = band_background;
    j["band_paint"] = band_paint;
    j["band_gas"] = band_gas;
  }
  return j;
}

}  // namespace soillead
