#include "soillead/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace soillead {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double geometric_mean_concentration(const std::vector<DesignPoint>& data) {
  double s = 0.0;
  for (const auto& p : data) s += p.log_concentration;
  return std::exp(s / static_cast<double>(data.size()));
}

std::vector<int> free_indices(std::optional<int> fixed_index) {
  std::vector<int> free;
  for (int k = 0; k < 3; ++k) {
    if (!fixed_index || *fixed_index != k) free.push_back(k);
  }
  return free;
}

// Nudge the start into the feasible region (all linear predictors positive).
bool make_feasible(Theta& theta, const std::vector<DesignPoint>& data,
                   const std::vector<int>& free) {
  if (std::isfinite(rss_at(theta, data))) return true;
  double gmean = geometric_mean_concentration(data);
  for (int k : free) {
    if (k == 0) {
      theta.background = std::max(theta.background, gmean);
      if (std::isfinite(rss_at(theta, data))) return true;
    }
  }
  for (int k : free) {
    if (k == 0) continue;
    double cov_mean = 0.0;
    for (const auto& p : data) {
      cov_mean += (k == 1 ? p.paint_exposure : p.gas_exposure);
    }
    cov_mean /= static_cast<double>(data.size());
    if (cov_mean > 0.0) {
      theta[k] = std::max(theta[k], gmean / cov_mean);
      if (std::isfinite(rss_at(theta, data))) return true;
    }
  }
  return std::isfinite(rss_at(theta, data));
}

}  // namespace

double rss_at(const Theta& theta, const std::vector<DesignPoint>& data) {
  double rss = 0.0;
  for (const auto& p : data) {
    double eta = linear_predictor(theta, p);
    if (eta <= 0.0) return kInf;
    double e = p.log_concentration - std::log(eta);
    rss += e * e;
  }
  return rss;
}

Theta initial_theta(const std::vector<DesignPoint>& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = data[static_cast<std::size_t>(i)].paint_exposure;
    X(i, 2) = data[static_cast<std::size_t>(i)].gas_exposure;
    y(i) = std::exp(data[static_cast<std::size_t>(i)].log_concentration);
  }
  // minimum-norm solution so unidentifiable coordinates land at 0;
  // columns negligible next to the intercept count as rank deficiency
  auto cod = X.completeOrthogonalDecomposition();
  cod.setThreshold(1e-10);
  Eigen::Vector3d beta = cod.solve(y);
  Theta theta;
  for (int k = 0; k < 3; ++k) theta[k] = std::max(beta(k), 0.0);
  if (theta.background == 0.0 && theta.paint_rate == 0.0 && theta.gas_rate == 0.0) {
    theta.background = geometric_mean_concentration(data);
  }
  return theta;
}

ConstrainedFit minimize_rss(const std::vector<DesignPoint>& data, Theta start,
                            std::optional<int> fixed_index,
                            const FitOptions& options) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const std::vector<int> free = free_indices(fixed_index);
  const auto nf = static_cast<Eigen::Index>(free.size());

  Theta theta = start;
  for (int k : free) theta[k] = std::max(theta[k], 0.0);
  if (!make_feasible(theta, data, free)) {
    throw FitError("minimize_rss: no feasible starting point (linear predictor <= 0)");
  }

  double rss = rss_at(theta, data);
  double lambda = 1e-3;
  bool converged = false;
  int iterations = 0;

  Eigen::MatrixXd J(n, nf);
  Eigen::VectorXd f(n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    iterations = iter + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = data[static_cast<std::size_t>(i)];
      double eta = linear_predictor(theta, p);
      f(i) = std::log(eta) - p.log_concentration;
      for (Eigen::Index j = 0; j < nf; ++j) {
        double x = free[static_cast<std::size_t>(j)] == 0
                       ? 1.0
                       : (free[static_cast<std::size_t>(j)] == 1 ? p.paint_exposure
                                                                 : p.gas_exposure);
        J(i, j) = x / eta;
      }
    }
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * f;

    // active-set reduction: coordinates pinned at 0 whose gradient pushes
    // outward stay out of the solve, so the remaining face converges fast;
    // directions with negligible curvature are frozen as unidentifiable
    double diag_max = A.diagonal().maxCoeff();
    std::vector<Eigen::Index> working;
    for (Eigen::Index j = 0; j < nf; ++j) {
      int k = free[static_cast<std::size_t>(j)];
      if (theta[k] == 0.0 && g(j) > 0.0) continue;
      if (A(j, j) < 1e-12 * diag_max) continue;
      working.push_back(j);
    }
    if (working.empty()) {
      converged = true;
      break;
    }
    const auto nw = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd Aw(nw, nw);
    Eigen::VectorXd gw(nw);
    for (Eigen::Index a = 0; a < nw; ++a) {
      gw(a) = g(working[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < nw; ++b) {
        Aw(a, b) = A(working[static_cast<std::size_t>(a)],
                     working[static_cast<std::size_t>(b)]);
      }
    }
    double max_diag = Aw.diagonal().maxCoeff();
    Eigen::VectorXd D = Aw.diagonal().cwiseMax(std::max(1e-8 * max_diag, 1e-300));

    bool accepted = false;
    for (int inner = 0; inner < 60; ++inner) {
      Eigen::MatrixXd M = Aw;
      M.diagonal() += lambda * D;
      Eigen::VectorXd delta = M.completeOrthogonalDecomposition().solve(-gw);
      Theta cand = theta;
      for (Eigen::Index a = 0; a < nw; ++a) {
        int k = free[static_cast<std::size_t>(working[static_cast<std::size_t>(a)])];
        cand[k] = std::max(theta[k] + delta(a), 0.0);
      }
      double rc = rss_at(cand, data);
      if (rc < rss) {
        double step2 = 0.0, scale2 = 0.0;
        for (int k = 0; k < 3; ++k) {
          step2 += (cand[k] - theta[k]) * (cand[k] - theta[k]);
          scale2 += cand[k] * cand[k];
        }
        double rel_dec = (rss - rc) / std::max(rss, 1e-300);
        theta = cand;
        rss = rc;
        lambda = std::max(lambda / 3.0, 1e-14);
        if (rel_dec < options.tol_objective &&
            std::sqrt(step2) <
                options.tol_step * (std::sqrt(scale2) + options.tol_step)) {
          converged = true;
        }
        accepted = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e15) break;
    }
    if (!accepted) {
      // no descent direction left at double precision: local minimum
      converged = true;
    }
    if (converged) break;
  }
  return ConstrainedFit{theta, rss, converged, iterations};
}

FitResult fit(const std::vector<DesignPoint>& data, const FitOptions& options) {
  const std::size_t n = data.size();
  if (n < 4) throw FitError("fit: need at least 4 samples");
  for (const auto& p : data) {
    if (p.paint_exposure < 0.0 || p.gas_exposure < 0.0) {
      throw FitError("fit: negative exposure");
    }
  }
  double t_min = kInf, t_max = -kInf, g_min = kInf, g_max = -kInf;
  for (const auto& p : data) {
    t_min = std::min(t_min, p.paint_exposure);
    t_max = std::max(t_max, p.paint_exposure);
    g_min = std::min(g_min, p.gas_exposure);
    g_max = std::max(g_max, p.gas_exposure);
  }
  if (t_max - t_min < 1e-14 * std::max(1.0, t_max) &&
      g_max - g_min < 1e-14 * std::max(1.0, g_max)) {
    throw FitError("fit: degenerate design, paint and gas exposures both constant");
  }

  Theta base = initial_theta(data);
  static constexpr double kFactors[] = {1.0, 1.5, 0.5, 2.0, 0.25, 3.0};
  int restarts = std::clamp(options.restarts, 1, 6);

  ConstrainedFit best;
  best.rss = kInf;
  for (int r = 0; r < restarts; ++r) {
    Theta start;
    for (int k = 0; k < 3; ++k) {
      start[k] = kFactors[r] * base[k] + (r > 0 ? 0.1 : 0.0);
    }
    ConstrainedFit attempt = minimize_rss(data, start, std::nullopt, options);
    if (attempt.rss < best.rss) best = attempt;
  }

  FitResult result;
  result.theta = best.theta;
  result.rss = best.rss;
  result.converged = best.converged;
  result.iterations = best.iterations;
  result.sigma2 = best.rss / static_cast<double>(n);
  result.sigma2_df =
      n > 3 ? best.rss / static_cast<double>(n - 3) : std::numeric_limits<double>::quiet_NaN();

  result.residuals.resize(n);
  result.jacobian.resize(static_cast<Eigen::Index>(n), 3);
  double res_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ModelEval eval = log_mean(result.theta, data[i]);
    result.residuals[i] = data[i].log_concentration - eval.mu_log;
    res_sum += result.residuals[i];
    for (int k = 0; k < 3; ++k) {
      result.jacobian(static_cast<Eigen::Index>(i), k) = eval.gradient[static_cast<std::size_t>(k)];
    }
  }
  result.residual_mean = res_sum / static_cast<double>(n);

  for (int k = 0; k < 3; ++k) {
    if (result.theta[k] == 0.0) result.active_bounds.push_back(k);
  }

  Eigen::Matrix3d jtj = result.jacobian.transpose() * result.jacobian;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
  result.jtj_singular = lu.rank() < 3;

  // collinearity among the identifiable directions is a hard error
  Eigen::Vector3d col_norms = result.jacobian.colwise().norm();
  std::vector<int> relevant;
  for (int k = 0; k < 3; ++k) {
    if (col_norms(k) > 1e-10 * col_norms.maxCoeff()) relevant.push_back(k);
  }
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(relevant.size()),
                      static_cast<Eigen::Index>(relevant.size()));
  for (std::size_t a = 0; a < relevant.size(); ++a) {
    for (std::size_t b = 0; b < relevant.size(); ++b) {
      sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          jtj(relevant[a], relevant[b]);
    }
  }
  if (Eigen::FullPivLU<Eigen::MatrixXd>(sub).rank() <
      static_cast<Eigen::Index>(relevant.size())) {
    throw FitError("fit: collinear exposures, J'J is rank deficient", result);
  }

  result.cov_theta =
      result.sigma2 * jtj.completeOrthogonalDecomposition().pseudoInverse();

  if (!result.converged) {
    throw FitError("fit: no convergence after " +
                       std::to_string(options.max_iterations) + " iterations",
                   result);
  }
  return result;
}

nlohmann::json FitResult::to_json() const {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 3; ++j) row.push_back(cov_theta(i, j));
    cov.push_back(row);
  }
  return nlohmann::json{
      {"theta",
       {{"background", theta.background},
        {"paint_rate", theta.paint_rate},
        {"gas_rate", theta.gas_rate}}},
      {"sigma", std::sqrt(sigma2)},
      {"sigma_df", std::sqrt(sigma2_df)},
      {"cov", cov},
      {"residual_mean", residual_mean},
      {"converged", converged},
      {"iterations", iterations},
      {"active_bounds", active_bounds},
      {"n", residuals.size()},
  };
}

}  // namespace soillead
