#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace soillead {

/// Rate parameters in ppm (background) and ppm per Mt cumulative exposure.
/// All three are constrained nonnegative.
struct Theta {
  double background = 0.0;  // theta0
  double paint_rate = 0.0;  // theta1
  double gas_rate = 0.0;    // theta2

  double operator[](int k) const {
    return k == 0 ? background : (k == 1 ? paint_rate : gas_rate);
  }
  double& operator[](int k) {
    return k == 0 ? background : (k == 1 ? paint_rate : gas_rate);
  }
  bool nonnegative() const {
    return background >= 0.0 && paint_rate >= 0.0 && gas_rate >= 0.0;
  }
};

/// One sample joined to its cumulative exposures.
struct DesignPoint {
  double paint_exposure = 0.0;  // T, Mt
  double gas_exposure = 0.0;    // G, Mt
  double log_concentration = 0.0;
  int year_built = 0;
};

struct ModelEval {
  double eta = 0.0;     // linear predictor, ppm
  double mu_log = 0.0;  // log(eta)
  std::array<double, 3> gradient{};  // d mu_log / d theta = (1, T, G) / eta
};

inline double linear_predictor(const Theta& theta, const DesignPoint& point) {
  return theta.background + theta.paint_rate * point.paint_exposure +
         theta.gas_rate * point.gas_exposure;
}

inline ModelEval log_mean(const Theta& theta, const DesignPoint& point) {
  double eta = linear_predictor(theta, point);
  if (eta <= 0.0) {
    throw std::domain_error("log_mean: nonpositive linear predictor");
  }
  ModelEval eval;
  eval.eta = eta;
  eval.mu_log = std::log(eta);
  eval.gradient = {1.0 / eta, point.paint_exposure / eta, point.gas_exposure / eta};
  return eval;
}

/// Estimated mean concentration on the raw scale, eta * exp(sigma2 / 2).
inline double fitted_mean(const Theta& theta, double sigma2, const DesignPoint& point) {
  if (sigma2 < 0.0) throw std::invalid_argument("fitted_mean: negative variance");
  return linear_predictor(theta, point) * std::exp(sigma2 / 2.0);
}

inline double log_likelihood(const Theta& theta, double sigma2,
                             const std::vector<DesignPoint>& data) {
  if (sigma2 <= 0.0) throw std::invalid_argument("log_likelihood: sigma2 must be > 0");
  constexpr double kLog2Pi = 1.8378770664093454836;
  double ll = 0.0;
  for (const auto& point : data) {
    double r = point.log_concentration - log_mean(theta, point).mu_log;
    ll += -0.5 * (kLog2Pi + std::log(sigma2)) - r * r / (2.0 * sigma2);
  }
  return ll;
}

/// Log-likelihood with sigma2 maximized out at RSS/n.
inline double profiled_log_likelihood(double rss, std::size_t n) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  if (n == 0) throw std::invalid_argument("profiled_log_likelihood: empty data");
  if (rss <= 0.0) rss = 1e-300;  // perfect fit; keep the value finite
  double nn = static_cast<double>(n);
  return -0.5 * nn * (kLog2Pi + std::log(rss / nn) + 1.0);
}

}  // namespace soillead
