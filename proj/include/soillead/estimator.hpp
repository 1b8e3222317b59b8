#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

#include "soillead/model.hpp"

namespace soillead {

struct FitOptions {
  int max_iterations = 200;
  double tol_objective = 1e-10;  // relative objective decrease
  double tol_step = 1e-8;        // relative step size
  int restarts = 3;              // deterministic perturbed starting points
};

struct FitResult {
  Theta theta;
  double sigma2 = 0.0;       // RSS / n (MLE)
  double sigma2_df = 0.0;    // RSS / (n - 3), reported for diagnostics
  double rss = 0.0;
  std::vector<double> residuals;  // log L_i - mu_log_i
  double residual_mean = 0.0;
  Eigen::MatrixXd jacobian;       // n x 3, d mu_log / d theta at the optimum
  Eigen::Matrix3d cov_theta;      // sigma2 * pinv(J'J)
  bool jtj_singular = false;
  bool converged = false;
  int iterations = 0;
  std::vector<int> active_bounds;  // theta indices at 0

  nlohmann::json to_json() const;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::optional<FitResult> best = std::nullopt)
      : std::runtime_error(what), best_iterate(std::move(best)) {}
  std::optional<FitResult> best_iterate;
};

/// OLS of raw concentration on (1, T, G), clipped to the nonnegative orthant.
Theta initial_theta(const std::vector<DesignPoint>& data);

/// Constrained least-squares fit of theta >= 0, maximum likelihood for the
/// log-scale model. Restarts from perturbed initial points and keeps the best.
FitResult fit(const std::vector<DesignPoint>& data, const FitOptions& options = {});

/// Minimize the log-scale RSS with one coordinate optionally pinned
/// (used by the profile-likelihood machinery).
struct ConstrainedFit {
  Theta theta;
  double rss = 0.0;
  bool converged = false;
  int iterations = 0;
};
ConstrainedFit minimize_rss(const std::vector<DesignPoint>& data, Theta start,
                            std::optional<int> fixed_index,
                            const FitOptions& options = {});

double rss_at(const Theta& theta, const std::vector<DesignPoint>& data);

}  // namespace soillead
