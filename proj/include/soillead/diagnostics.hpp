#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "soillead/inference.hpp"

namespace soillead {

/// National Survey benchmark: measurement SD of log concentration
/// ("within a factor of 2.7 of the true value"). Report annotation only.
inline constexpr double kMeasurementLogSd = 0.5;

struct OutlierTable {
  std::vector<double> leverage;           // hat values from the linearized model
  std::vector<double> studentized;        // externally studentized residuals
  std::vector<double> bonferroni_p;       // min(1, n * 2 * P(T > |t|))
  std::vector<bool> perfect_leverage;     // h == 1, t undefined
};

struct ScoreTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

struct VarianceRatio {
  double ratio = 0.0;         // sigma2 (fit) / pooled intra-year variance
  double bootstrap_se = 0.0;  // 0 when no bootstrap supplied
  double pooled_variance = 0.0;
  int pooled_df = 0;
};

struct BackgroundCheck {
  double reference_mean = 0.0;
  double reference_se = 0.0;
  double z = 0.0;
  bool consistent = false;  // |z| < 1.96
};

enum class Predictor { paint, gas };

struct MarginalPlot {
  std::vector<double> x;  // sorted predictor values (grid = data range)
  std::vector<double> data_smooth;
  std::vector<double> model_smooth;
};

OutlierTable hat_and_student(const FitResult& fit,
                             const std::vector<DesignPoint>& data);

std::vector<double> cooks_distance(const FitResult& fit,
                                   const std::vector<DesignPoint>& data);

/// Cook-Weisberg score test. Default variance predictor is the fitted log-mean.
ScoreTest score_test_hetero(const FitResult& fit,
                            const std::vector<DesignPoint>& data,
                            const std::vector<std::vector<double>>* predictors = nullptr);

/// Locally weighted linear smoother, tricube weights, bisquare robustness.
std::vector<double> lowess(const std::vector<double>& x,
                           const std::vector<double>& y, double fraction = 0.7,
                           int robust_iterations = 3);

VarianceRatio variance_ratio(const FitResult& fit,
                             const std::vector<DesignPoint>& data,
                             const BootstrapResult* bootstrap = nullptr,
                             const FitOptions& fit_options = {});

BackgroundCheck background_consistency(const std::vector<double>& reference_ppm,
                                       const FitResult& fit);

MarginalPlot marginal_plot_data(const FitResult& fit,
                                const std::vector<DesignPoint>& data,
                                Predictor predictor);

struct DiagnosticsReport {
  OutlierTable outliers;
  std::vector<double> cooks_d;
  ScoreTest score_test;
  VarianceRatio variance;
  bool has_variance_ratio = false;

  nlohmann::json to_json() const;
};

DiagnosticsReport run_diagnostics(const FitResult& fit,
                                  const std::vector<DesignPoint>& data,
                                  const BootstrapResult* bootstrap = nullptr);

/// CSV: id,residual,student_t,bonferroni_p,leverage,cooks_d
void write_diagnostics_csv(const DiagnosticsReport& report, const FitResult& fit,
                           const std::vector<std::string>& ids,
                           const std::string& path);

}  // namespace soillead
