#include "soillead/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>

namespace soillead {

namespace {

std::vector<double> hat_values(const Eigen::MatrixXd& J) {
  Eigen::MatrixXd pinv =
      (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> h(static_cast<std::size_t>(J.rows()));
  for (Eigen::Index i = 0; i < J.rows(); ++i) {
    h[static_cast<std::size_t>(i)] = (J.row(i) * pinv * J.row(i).transpose())(0, 0);
  }
  return h;
}

// pooled intra-year sample variance of the given responses
std::pair<double, int> pooled_intra_year_variance(
    const std::vector<DesignPoint>& data, const std::vector<double>& response) {
  std::map<int, std::vector<double>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    groups[data[i].year_built].push_back(response[i]);
  }
  double ss = 0.0;
  int df = 0;
  for (const auto& [year, values] : groups) {
    if (values.size() < 2) continue;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(values.size());
    for (double v : values) ss += (v - mean) * (v - mean);
    df += static_cast<int>(values.size()) - 1;
  }
  return {df > 0 ? ss / static_cast<double>(df) : 0.0, df};
}

}  // namespace

OutlierTable hat_and_student(const FitResult& fit,
                             const std::vector<DesignPoint>& data) {
  const std::size_t n = data.size();
  const int p = 3;
  if (n <= static_cast<std::size_t>(p + 1)) {
    throw std::invalid_argument("hat_and_student: too few samples");
  }
  OutlierTable table;
  table.leverage = hat_values(fit.jacobian);
  table.studentized.resize(n);
  table.bonferroni_p.resize(n);
  table.perfect_leverage.resize(n);

  boost::math::students_t tdist(static_cast<double>(n) - p - 1);
  double rss = fit.rss;
  for (std::size_t i = 0; i < n; ++i) {
    double h = table.leverage[i];
    if (h >= 1.0 - 1e-12) {
      table.perfect_leverage[i] = true;
      table.studentized[i] = std::numeric_limits<double>::quiet_NaN();
      table.bonferroni_p[i] = 1.0;
      continue;
    }
    double e = fit.residuals[i];
    // leave-one-out variance on the linearized model
    double s2_i = (rss - e * e / (1.0 - h)) / static_cast<double>(n - p - 1);
    s2_i = std::max(s2_i, 0.0);
    double t = s2_i > 0.0 ? e / std::sqrt(s2_i * (1.0 - h))
                          : (e == 0.0 ? 0.0 : std::copysign(1e12, e));
    table.studentized[i] = t;
    double tail = boost::math::cdf(boost::math::complement(tdist, std::fabs(t)));
    table.bonferroni_p[i] = std::min(1.0, static_cast<double>(n) * 2.0 * tail);
  }
  return table;
}

std::vector<double> cooks_distance(const FitResult& fit,
                                   const std::vector<DesignPoint>& data) {
  const std::size_t n = data.size();
  const double p = 3.0;
  auto h = hat_values(fit.jacobian);
  double s2 = fit.sigma2_df;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (h[i] >= 1.0 - 1e-12 || s2 <= 0.0) {
      d[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    double e = fit.residuals[i];
    double r2 = e * e / (s2 * (1.0 - h[i]));  // internally studentized, squared
    d[i] = r2 * h[i] / (p * (1.0 - h[i]));
  }
  return d;
}

ScoreTest score_test_hetero(const FitResult& fit,
                            const std::vector<DesignPoint>& data,
                            const std::vector<std::vector<double>>* predictors) {
  const std::size_t n = data.size();
  std::vector<std::vector<double>> default_pred;
  if (!predictors) {
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
      mu[i] = data[i].log_concentration - fit.residuals[i];
    }
    default_pred.push_back(std::move(mu));
    predictors = &default_pred;
  }
  const auto q = static_cast<Eigen::Index>(predictors->size());
  if (q == 0) throw std::invalid_argument("score_test_hetero: no predictors");

  Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), q + 1);
  for (std::size_t i = 0; i < n; ++i) Z(static_cast<Eigen::Index>(i), 0) = 1.0;
  for (Eigen::Index j = 0; j < q; ++j) {
    const auto& col = (*predictors)[static_cast<std::size_t>(j)];
    if (col.size() != n) {
      throw std::invalid_argument("score_test_hetero: predictor length mismatch");
    }
    double mn = *std::min_element(col.begin(), col.end());
    double mx = *std::max_element(col.begin(), col.end());
    if (mx - mn < 1e-14 * std::max(1.0, std::fabs(mx))) {
      throw std::invalid_argument("score_test_hetero: constant variance predictor");
    }
    for (std::size_t i = 0; i < n; ++i) {
      Z(static_cast<Eigen::Index>(i), j + 1) = col[i];
    }
  }

  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    u(static_cast<Eigen::Index>(i)) = fit.residuals[i] * fit.residuals[i] / fit.sigma2;
  }
  Eigen::VectorXd coef = Z.completeOrthogonalDecomposition().solve(u);
  Eigen::VectorXd uhat = Z * coef;
  double ubar = u.mean();
  double ssreg = (uhat.array() - ubar).square().sum();

  ScoreTest out;
  out.statistic = ssreg / 2.0;
  out.df = static_cast<int>(q);
  boost::math::chi_squared chi2(out.df);
  out.p_value = boost::math::cdf(boost::math::complement(chi2, out.statistic));
  return out;
}

std::vector<double> lowess(const std::vector<double>& x,
                           const std::vector<double>& y, double fraction,
                           int robust_iterations) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) {
    throw std::invalid_argument("lowess: need at least 3 (x, y) pairs");
  }
  if (fraction <= 0.0 || fraction > 1.0) {
    throw std::invalid_argument("lowess: fraction must be in (0, 1]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  std::size_t span = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  span = std::min(span, n);

  std::vector<double> fitted(n, 0.0);
  std::vector<double> robust_w(n, 1.0);

  for (int pass = 0; pass <= robust_iterations; ++pass) {
    for (std::size_t oi = 0; oi < n; ++oi) {
      std::size_t i = order[oi];
      // nearest-neighbor window around oi in sorted order
      std::size_t lo = oi >= span - 1 ? oi - (span - 1) : 0;
      std::size_t hi = std::min(lo + span - 1, n - 1);
      // slide window to minimize max distance
      while (true) {
        bool can_left = lo > 0 && hi > oi;
        bool can_right = hi < n - 1 && lo < oi;
        double dl = can_left ? x[i] - x[order[lo - 1]] : std::numeric_limits<double>::infinity();
        double dr = can_right ? x[order[hi + 1]] - x[i] : std::numeric_limits<double>::infinity();
        double cur_l = x[i] - x[order[lo]];
        double cur_r = x[order[hi]] - x[i];
        if (can_left && dl < cur_r) {
          --lo;
          --hi;
        } else if (can_right && dr < cur_l) {
          ++lo;
          ++hi;
        } else {
          break;
        }
      }
      double dmax = std::max(x[i] - x[order[lo]], x[order[hi]] - x[i]);

      double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        std::size_t jj = order[j];
        double w;
        if (dmax > 0.0) {
          double d = std::fabs(x[jj] - x[i]) / dmax;
          if (d >= 1.0) {
            w = 0.0;
          } else {
            double c = 1.0 - d * d * d;
            w = c * c * c;
          }
        } else {
          w = 1.0;  // duplicate-x window: equal weights
        }
        w *= robust_w[jj];
        sw += w;
        swx += w * x[jj];
        swy += w * y[jj];
        swxx += w * x[jj] * x[jj];
        swxy += w * x[jj] * y[jj];
      }
      if (sw <= 0.0) {
        fitted[i] = y[i];
        continue;
      }
      double det = sw * swxx - swx * swx;
      if (std::fabs(det) > 1e-12 * std::max(1.0, sw * swxx)) {
        double slope = (sw * swxy - swx * swy) / det;
        double intercept = (swy - slope * swx) / sw;
        fitted[i] = intercept + slope * x[i];
      } else {
        fitted[i] = swy / sw;  // degenerate window, weighted mean
      }
    }
    if (pass == robust_iterations) break;
    // bisquare robustness weights from the residual scale
    std::vector<double> absres(n);
    for (std::size_t i = 0; i < n; ++i) absres[i] = std::fabs(y[i] - fitted[i]);
    std::vector<double> sorted_res = absres;
    std::nth_element(sorted_res.begin(), sorted_res.begin() + static_cast<long>(n / 2),
                     sorted_res.end());
    double s = sorted_res[n / 2];
    if (s <= 0.0) {
      std::fill(robust_w.begin(), robust_w.end(), 1.0);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d = absres[i] / (6.0 * s);
      robust_w[i] = d >= 1.0 ? 0.0 : (1.0 - d * d) * (1.0 - d * d);
    }
  }
  return fitted;
}

VarianceRatio variance_ratio(const FitResult& fit,
                             const std::vector<DesignPoint>& data,
                             const BootstrapResult* bootstrap,
                             const FitOptions& fit_options) {
  (void)fit_options;
  std::vector<double> response(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    response[i] = data[i].log_concentration;
  }
  auto [pooled, df] = pooled_intra_year_variance(data, response);
  if (df == 0) {
    throw std::invalid_argument(
        "variance_ratio: no year-built group with 2+ samples");
  }
  VarianceRatio out;
  out.pooled_variance = pooled;
  out.pooled_df = df;
  out.ratio = fit.sigma2 / pooled;

  if (bootstrap && bootstrap->replicates.size() >= 2) {
    std::vector<double> ratios;
    ratios.reserve(bootstrap->replicates.size());
    for (const auto& rep : bootstrap->replicates) {
      auto rep_response = bootstrap_response(fit, data, bootstrap->seed, rep.index,
                                             bootstrap->studentized);
      auto [v_eps, rdf] = pooled_intra_year_variance(data, rep_response);
      if (rdf == 0 || v_eps <= 0.0) continue;
      ratios.push_back(rep.sigma2 / v_eps);
    }
    if (ratios.size() >= 2) {
      double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) /
                    static_cast<double>(ratios.size());
      double ss = 0.0;
      for (double r : ratios) ss += (r - mean) * (r - mean);
      out.bootstrap_se = std::sqrt(ss / static_cast<double>(ratios.size() - 1));
    }
  }
  return out;
}

BackgroundCheck background_consistency(const std::vector<double>& reference_ppm,
                                       const FitResult& fit) {
  if (reference_ppm.empty()) {
    throw std::invalid_argument("background_consistency: no reference samples");
  }
  BackgroundCheck out;
  double mean = std::accumulate(reference_ppm.begin(), reference_ppm.end(), 0.0) /
                static_cast<double>(reference_ppm.size());
  double se = 0.0;
  if (reference_ppm.size() > 1) {
    double ss = 0.0;
    for (double v : reference_ppm) ss += (v - mean) * (v - mean);
    se = std::sqrt(ss / static_cast<double>(reference_ppm.size() - 1) /
                   static_cast<double>(reference_ppm.size()));
  }
  out.reference_mean = mean;
  out.reference_se = se;
  double se_theta0 = std::sqrt(std::max(fit.cov_theta(0, 0), 0.0));
  double denom = std::sqrt(se * se + se_theta0 * se_theta0);
  out.z = denom > 0.0 ? (mean - fit.theta.background) / denom : 0.0;
  out.consistent = std::fabs(out.z) < 1.96;
  return out;
}

MarginalPlot marginal_plot_data(const FitResult& fit,
                                const std::vector<DesignPoint>& data,
                                Predictor predictor) {
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto pred = [&](std::size_t i) {
    return predictor == Predictor::paint ? data[i].paint_exposure
                                         : data[i].gas_exposure;
  };
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pred(a) < pred(b); });

  MarginalPlot plot;
  std::vector<double> observed(n), fitted(n);
  plot.x.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t i = order[j];
    plot.x[j] = pred(i);
    observed[j] = data[i].log_concentration;
    fitted[j] = data[i].log_concentration - fit.residuals[i];
  }
  plot.data_smooth = lowess(plot.x, observed, 0.7, 0);
  plot.model_smooth = lowess(plot.x, fitted, 0.7, 0);
  return plot;
}

DiagnosticsReport run_diagnostics(const FitResult& fit,
                                  const std::vector<DesignPoint>& data,
                                  const BootstrapResult* bootstrap) {
  DiagnosticsReport report;
  report.outliers = hat_and_student(fit, data);
  report.cooks_d = cooks_distance(fit, data);
  report.score_test = score_test_hetero(fit, data);
  try {
    report.variance = variance_ratio(fit, data, bootstrap);
    report.has_variance_ratio = true;
  } catch (const std::invalid_argument&) {
    report.has_variance_ratio = false;  // no replicated years in the data
  }
  return report;
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json j{
      {"studentized", outliers.studentized},
      {"bonferroni_p", outliers.bonferroni_p},
      {"leverage", outliers.leverage},
      {"cooks_d", cooks_d},
      {"score_test",
       {{"statistic", score_test.statistic},
        {"df", score_test.df},
        {"p", score_test.p_value}}},
      {"measurement_log_sd_benchmark", kMeasurementLogSd},
  };
  if (has_variance_ratio) {
    j["variance_ratio"] = {{"ratio", variance.ratio},
                           {"bootstrap_se", variance.bootstrap_se},
                           {"pooled_variance", variance.pooled_variance},
                           {"pooled_df", variance.pooled_df}};
  }
  return j;
}

void write_diagnostics_csv(const DiagnosticsReport& report, const FitResult& fit,
                           const std::vector<std::string>& ids,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write diagnostics file: " + path);
  f.precision(17);
  f << "id,residual,student_t,bonferroni_p,leverage,cooks_d\n";
  for (std::size_t i = 0; i < fit.residuals.size(); ++i) {
    f << (i < ids.size() ? ids[i] : std::to_string(i)) << "," << fit.residuals[i]
      << "," << report.outliers.studentized[i] << ","
      << report.outliers.bonferroni_p[i] << "," << report.outliers.leverage[i]
      << "," << report.cooks_d[i] << "\n";
  }
}

}  // namespace soillead
