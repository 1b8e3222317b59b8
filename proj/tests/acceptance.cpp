// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "soillead/apportion.hpp"
#include "soillead/diagnostics.hpp"
#include "soillead/estimator.hpp"
#include "soillead/inference.hpp"
#include "soillead/simulator.hpp"
#include "support/fixtures.hpp"

using namespace soillead;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool ok, const std::string& detail = "") {
  std::printf("[%s] criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", number, name,
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. parameter recovery over 200 Monte Carlo replicates
void criterion_recovery() {
  auto start = std::chrono::steady_clock::now();
  const Theta truth{15.0, 200.0, 10.0};
  int reps = 200;
  int hit[3] = {0, 0, 0};
  int usable = 0;
  for (int r = 0; r < reps; ++r) {
    auto points = fixtures::simulate_points(
        fixtures::recovery_config(10000 + static_cast<std::uint64_t>(r)));
    FitResult result;
    try {
      result = fit(points);
    } catch (const std::exception&) {
      continue;
    }
    auto se = asymptotic_se(result);
    ++usable;
    for (int k = 0; k < 3; ++k) {
      if (std::fabs(result.theta[k] - truth[k]) <=
          3.0 * se.se[static_cast<std::size_t>(k)]) {
        ++hit[k];
      }
    }
  }
  double secs = elapsed_s(start);
  bool ok = usable == reps && secs < 300.0;
  char detail[160];
  for (int k = 0; k < 3; ++k) {
    if (static_cast<double>(hit[k]) < 0.99 * static_cast<double>(reps)) ok = false;
  }
  std::snprintf(detail, sizeof detail,
                "coverage %d/%d, %d/%d, %d/%d of %d replicates in %.1fs", hit[0],
                reps, hit[1], reps, hit[2], reps, reps, secs);
  report(1, "parameter recovery within 3 SEs", ok, detail);
}

// 2. published apportionment identity
void criterion_efc_identity() {
  Theta theta{15.03, 200.64, 9.93};
  double T = 0.2090, G = 4.223;
  double eta = linear_predictor(theta, {T, G, 0.0, 0});
  auto f = efc(theta, T, G);
  bool ok = std::fabs(f[0] - 0.152) <= 0.001 && std::fabs(f[1] - 0.424) <= 0.001 &&
            std::fabs(f[2] - 0.424) <= 0.001 && std::fabs(eta - 98.9) <= 0.2 &&
            std::fabs(15.03 / 0.152 - eta) <= 0.5;
  char detail[120];
  std::snprintf(detail, sizeof detail, "fractions (%.4f, %.4f, %.4f), eta %.2f ppm",
                f[0], f[1], f[2], eta);
  report(2, "apportionment identity at the published estimates", ok, detail);
}

// 3. sum-to-one across curves and bootstrap replicates
void criterion_sum_to_one() {
  auto points = fixtures::simulate_points(fixtures::recovery_config(777));
  auto result = fit(points);
  auto boot = residual_bootstrap(result, points, BootstrapOptions{50, 3, false, 0.2});
  auto paint = fixtures::paint_exposure();
  auto gas = fixtures::gas_exposure();
  auto curve = efc_curve(result, paint, gas, &boot);
  double worst = 0.0;
  for (std::size_t i = 0; i < curve.years.size(); ++i) {
    worst = std::max(worst, std::fabs(curve.f_background[i] + curve.f_paint[i] +
                                      curve.f_gas[i] - 1.0));
  }
  for (const auto& rep : boot.replicates) {
    for (int y = paint.y_min(); y <= paint.measurement_year(); ++y) {
      auto f = efc(rep.theta, paint.value(y), gas.value(y));
      worst = std::max(worst, std::fabs(f[0] + f[1] + f[2] - 1.0));
    }
  }
  char detail[80];
  std::snprintf(detail, sizeof detail, "worst |sum - 1| = %.2e", worst);
  report(3, "EFC fractions sum to one everywhere", worst < 1e-12, detail);
}

// 4. analytic gradient vs central differences
void criterion_gradient() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unif(0.05, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Theta theta{unif(rng), unif(rng), unif(rng)};
    DesignPoint p{unif(rng), unif(rng), 0.0, 1950};
    auto eval = log_mean(theta, p);
    for (int k = 0; k < 3; ++k) {
      double h = 1e-6 * std::max(1.0, std::fabs(theta[k]));
      Theta up = theta, dn = theta;
      up[k] += h;
      dn[k] -= h;
      double fd = (log_mean(up, p).mu_log - log_mean(dn, p).mu_log) / (2.0 * h);
      double rel = std::fabs(eval.gradient[static_cast<std::size_t>(k)] - fd) /
                   std::max(std::fabs(fd), 1e-12);
      worst = std::max(worst, rel);
    }
  }
  char detail[80];
  std::snprintf(detail, sizeof detail, "worst relative gap %.2e over 100 points", worst);
  report(4, "log-mean gradient matches finite differences", worst <= 1e-6, detail);
}

// 5. profile equals Wald when quadratic; coverage on interior truth
void criterion_profile() {
  // near-quadratic regime
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> unif(0.05, 2.0);
  std::normal_distribution<double> gauss(0.0, 0.02);
  Theta truth{15.0, 30.0, 8.0};
  std::vector<DesignPoint> data;
  for (int i = 0; i < 400; ++i) {
    DesignPoint p{unif(rng), unif(rng), 0.0, 1950};
    p.log_concentration = log_mean(truth, p).mu_log + gauss(rng);
    data.push_back(p);
  }
  auto result = fit(data);
  auto se = asymptotic_se(result);
  bool quad_ok = true;
  double worst = 0.0;
  const double z = 1.959963984540054;
  for (int k = 0; k < 3; ++k) {
    auto pi = profile_interval(result, data, k);
    double est = result.theta[k];
    double half = z * se.se[static_cast<std::size_t>(k)];
    double rel_lo = std::fabs(pi.lower - (est - half)) / est;
    double rel_hi = std::fabs(pi.upper - (est + half)) / est;
    worst = std::max({worst, rel_lo, rel_hi});
    if (rel_lo > 1e-4 || rel_hi > 1e-4) quad_ok = false;
  }

  // coverage of theta0 over 200 interior-truth replicates
  int covered = 0, reps = 200;
  for (int r = 0; r < reps; ++r) {
    auto points = fixtures::simulate_points(
        fixtures::recovery_config(20000 + static_cast<std::uint64_t>(r)));
    try {
      auto f = fit(points);
      auto pi = profile_interval(f, points, 0);
      if (pi.lower <= 15.0 && 15.0 <= pi.upper) ++covered;
    } catch (const std::exception&) {
    }
  }
  double rate = static_cast<double>(covered) / static_cast<double>(reps);
  bool ok = quad_ok && rate >= 0.91 && rate <= 0.99;
  char detail[120];
  std::snprintf(detail, sizeof detail,
                "worst Wald gap %.2e, coverage %.1f%% (%d/%d)", worst, 100.0 * rate,
                covered, reps);
  report(5, "profile intervals: quadratic limit and coverage", ok, detail);
}

// 6. bootstrap determinism and agreement
void criterion_bootstrap() {
  auto points = fixtures::simulate_points(fixtures::recovery_config(301));
  auto result = fit(points);
  BootstrapOptions opts{100, 77, false, 0.2};
  auto a = residual_bootstrap(result, points, opts);
  auto b = residual_bootstrap(result, points, opts);
  bool identical = a.replicates.size() == b.replicates.size();
  if (identical) {
    for (std::size_t i = 0; i < a.replicates.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        if (a.replicates[i].theta[k] != b.replicates[i].theta[k]) identical = false;
      }
      if (a.replicates[i].sigma2 != b.replicates[i].sigma2) identical = false;
    }
  }

  auto se = asymptotic_se(result);
  bool agree = true;
  for (int k = 0; k < 3; ++k) {
    auto ku = static_cast<std::size_t>(k);
    if (std::fabs(a.se_theta[ku] - se.se[ku]) > 0.35 * se.se[ku]) agree = false;
  }

  // zero residuals: every replicate returns the point estimate
  Theta truth{12.0, 150.0, 9.0};
  auto paint = fixtures::paint_exposure();
  auto gas = fixtures::gas_exposure();
  std::vector<DesignPoint> exact;
  for (int y = 1905; y <= 1980; y += 5) {
    DesignPoint p{paint.value(y), gas.value(y), 0.0, y};
    p.log_concentration = log_mean(truth, p).mu_log;
    exact.push_back(p);
  }
  auto perfect = fit(exact);
  auto pboot = residual_bootstrap(perfect, exact, BootstrapOptions{20, 5, false, 0.2});
  bool zero_se = true;
  for (double s : pboot.se_theta) {
    if (s > 1e-9) zero_se = false;
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "identical=%d, zero-residual SEs <= 1e-9=%d, max |boot/asym - 1| "
                "= %.2f",
                identical ? 1 : 0, zero_se ? 1 : 0,
                std::max({std::fabs(a.se_theta[0] / se.se[0] - 1.0),
                          std::fabs(a.se_theta[1] / se.se[1] - 1.0),
                          std::fabs(a.se_theta[2] / se.se[2] - 1.0)}));
  report(6, "bootstrap determinism and SE agreement", identical && agree && zero_se,
         detail);
}

// 7. weighted-error-average moment formulas by Monte Carlo
void criterion_delta_moments() {
  auto start = std::chrono::steady_clock::now();
  ErrorConfig err;
  err.epsilon_mean = 1.1;
  err.epsilon_sd = 0.35;
  err.shared = true;

  std::vector<std::optional<double>> amounts{1.0, 3.0, 0.5, 2.5, 4.0};
  YearlySeries series(1970, std::move(amounts));

  const int draws = 100000;
  std::mt19937_64 rng(2718);
  std::vector<double> d_full, d_tail;
  for (int rep = 0; rep < draws; ++rep) {
    std::vector<double> eps(5);
    for (auto& e : eps) {
      e = lognormal_from_mean_sd(err.epsilon_mean, err.epsilon_sd,
                                 standard_normal(rng));
    }
    std::vector<std::optional<double>> wf{1.0, 3.0, 0.5, 2.5, 4.0};
    std::vector<std::optional<double>> wt{0.5, 2.5, 4.0};
    std::vector<double> eps_tail(eps.begin() + 2, eps.end());
    d_full.push_back(draw_delta(YearlySeries(1970, std::move(wf)), err, eps, {}));
    d_tail.push_back(draw_delta(YearlySeries(1972, std::move(wt)), err, eps_tail, {}));
  }
  auto moments = [](const std::vector<double>& xs) {
    double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
      double c = x - mean;
      m2 += c * c;
      m4 += c * c * c * c;
    }
    m2 /= n;
    m4 /= n;
    return std::array<double, 4>{mean, m2 * n / (n - 1.0), std::sqrt(m2 / n),
                                 std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
  };

  std::vector<std::optional<double>> full_w{1.0, 3.0, 0.5, 2.5, 4.0};
  YearlySeries full(1970, std::move(full_w));
  auto expect = delta_moments(full, err);
  auto mc = moments(d_full);
  bool mean_ok = std::fabs(mc[0] - expect.mean) <= 3.0 * mc[2];
  bool var_ok = std::fabs(mc[1] - expect.variance) <= 3.0 * mc[3];

  double cov_expect = delta_covariance(series, 1970, 1972, err);
  double mf = 0.0, mt = 0.0;
  double n = static_cast<double>(draws);
  for (int i = 0; i < draws; ++i) {
    mf += d_full[static_cast<std::size_t>(i)];
    mt += d_tail[static_cast<std::size_t>(i)];
  }
  mf /= n;
  mt /= n;
  double cov = 0.0, m22 = 0.0;
  for (int i = 0; i < draws; ++i) {
    double a = d_full[static_cast<std::size_t>(i)] - mf;
    double b = d_tail[static_cast<std::size_t>(i)] - mt;
    cov += a * b;
    m22 += a * a * b * b;
  }
  cov /= n - 1.0;
  m22 /= n;
  double se_cov = std::sqrt(std::max(m22 - cov * cov, 0.0) / n);
  bool cov_ok = std::fabs(cov - cov_expect) <= 3.0 * se_cov;
  double secs = elapsed_s(start);
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "mean gap %.1e, var gap %.1e, cov gap %.1e (3SE), %.1fs",
                std::fabs(mc[0] - expect.mean), std::fabs(mc[1] - expect.variance),
                std::fabs(cov - cov_expect), secs);
  report(7, "error-average moments verified by Monte Carlo",
         mean_ok && var_ok && cov_ok && secs < 30.0, detail);
}

// 8. score-test size calibration
void criterion_score_size() {
  int rejections = 0, trials = 1000, usable = 0;
  Theta truth{15.0, 200.0, 10.0};
  auto paint = fixtures::paint_exposure();
  auto gas = fixtures::gas_exposure();
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(50000 + static_cast<std::uint64_t>(t));
    std::vector<DesignPoint> data;
    for (int i = 0; i < 100; ++i) {
      int y = 1902 + static_cast<int>(uniform01(rng) * 85.0);
      DesignPoint p{paint.value(y), gas.value(y), 0.0, y};
      p.log_concentration = log_mean(truth, p).mu_log + standard_normal(rng);
      data.push_back(p);
    }
    try {
      auto result = fit(data);
      auto st = score_test_hetero(result, data);
      ++usable;
      if (st.p_value < 0.05) ++rejections;
    } catch (const std::exception&) {
    }
  }
  double rate = static_cast<double>(rejections) / static_cast<double>(usable);
  bool ok = usable >= 990 && rate >= 0.03 && rate <= 0.07;
  char detail[100];
  std::snprintf(detail, sizeof detail, "empirical size %.2f%% (%d/%d)", 100.0 * rate,
                rejections, usable);
  report(8, "score-test size within [3%, 7%]", ok, detail);
}

// 9. planted high-leverage outlier dominates Cook's Distance
void criterion_influence() {
  Theta truth{15.0, 200.0, 10.0};
  auto paint = fixtures::paint_exposure();
  auto gas = fixtures::gas_exposure();
  std::mt19937_64 rng(606);
  std::vector<DesignPoint> data;
  // bulk of the data in old housing, a single newest structure far off the fit
  for (int i = 0; i < 80; ++i) {
    int y = 1905 + static_cast<int>(uniform01(rng) * 40.0);
    DesignPoint p{paint.value(y), gas.value(y), 0.0, y};
    p.log_concentration = log_mean(truth, p).mu_log + 0.5 * standard_normal(rng);
    data.push_back(p);
  }
  DesignPoint lone{paint.value(1984), gas.value(1984), 0.0, 1984};
  lone.log_concentration = log_mean(truth, lone).mu_log + 3.0;
  data.push_back(lone);
  auto result = fit(data);
  auto d = cooks_distance(result, data);
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] > d[argmax]) argmax = i;
  }
  char detail[100];
  std::snprintf(detail, sizeof detail, "max D = %.3f at index %zu (planted %zu)",
                d[argmax], argmax, d.size() - 1);
  report(9, "planted high-leverage outlier has maximum Cook's Distance",
         argmax == d.size() - 1, detail);
}

// 10. variance ratio near 1 on pure noise with per-year replicates
void criterion_variance_ratio() {
  Theta truth{15.0, 200.0, 10.0};
  auto paint = fixtures::paint_exposure();
  auto gas = fixtures::gas_exposure();
  std::mt19937_64 rng(808);
  std::vector<DesignPoint> data;
  int per_year = 2000 / 80;
  for (int y = 1903; y <= 1982; ++y) {
    for (int r = 0; r < per_year; ++r) {
      DesignPoint p{paint.value(y), gas.value(y), 0.0, y};
      p.log_concentration = log_mean(truth, p).mu_log + standard_normal(rng);
      data.push_back(p);
    }
  }
  auto result = fit(data);
  auto vr = variance_ratio(result, data);
  char detail[100];
  std::snprintf(detail, sizeof detail, "ratio %.4f with n = %zu", vr.ratio,
                data.size());
  report(10, "variance ratio within 0.05 of 1", std::fabs(vr.ratio - 1.0) <= 0.05,
         detail);
}

// 11. through-origin imputation slope on an exact-proportional fixture
void criterion_imputation() {
  std::vector<std::optional<double>> ta, ra;
  double ratio = 0.0205;
  std::mt19937_64 rng(909);
  for (int i = 0; i < 12; ++i) {
    double r = 50.0 + 400.0 * uniform01(rng);
    ra.emplace_back(r);
    ta.emplace_back(ratio * r);
  }
  ta.push_back(std::nullopt);
  ra.emplace_back(300.0);
  YearlySeries target(1940, std::move(ta));
  YearlySeries reference(1940, std::move(ra));
  auto result = impute_proportional(target, reference, {1940, 1951});
  bool ok = std::fabs(result.slope - ratio) <= 1e-12 * ratio &&
            std::fabs(result.r_squared - 1.0) <= 1e-12 &&
            std::fabs(*result.filled.at(1952) - ratio * 300.0) <= 1e-12;
  char detail[100];
  std::snprintf(detail, sizeof detail, "slope %.17g, r^2 %.17g", result.slope,
                result.r_squared);
  report(11, "through-origin imputation is exact on proportional data", ok, detail);
}

// 12. exposure-scaling equivariance across the whole stack
void criterion_equivariance() {
  auto points = fixtures::simulate_points(fixtures::recovery_config(1212));
  auto base = fit(points);
  auto base_pi = profile_interval(base, points, 1);
  auto base_f = efc(base.theta, points[5].paint_exposure, points[5].gas_exposure);

  double k = 50.0;
  auto scaled = points;
  for (auto& p : scaled) {
    p.paint_exposure *= k;
    p.gas_exposure *= k;
  }
  auto result = fit(scaled);
  auto pi = profile_interval(result, scaled, 1);
  auto f = efc(result.theta, scaled[5].paint_exposure, scaled[5].gas_exposure);

  auto rel = [](double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-12});
  };
  double worst = 0.0;
  worst = std::max(worst, rel(result.theta.background, base.theta.background));
  worst = std::max(worst, rel(result.theta.paint_rate * k, base.theta.paint_rate));
  worst = std::max(worst, rel(result.theta.gas_rate * k, base.theta.gas_rate));
  worst = std::max(worst, rel(result.sigma2, base.sigma2));
  for (std::size_t i = 0; i < points.size(); ++i) {
    worst = std::max(worst, std::fabs(result.residuals[i] - base.residuals[i]));
  }
  for (int c = 0; c < 3; ++c) {
    worst = std::max(worst, std::fabs(f[static_cast<std::size_t>(c)] -
                                      base_f[static_cast<std::size_t>(c)]));
  }
  double worst_int = std::max(rel(pi.lower * k, base_pi.lower),
                              rel(pi.upper * k, base_pi.upper));
  char detail[100];
  std::snprintf(detail, sizeof detail, "worst gap %.1e, intervals %.1e", worst,
                worst_int);
  report(12, "exposure-scaling equivariance", worst <= 1e-6 && worst_int <= 1e-5,
         detail);
}

// 13. CLI golden run
void criterion_cli_golden() {
  auto start = std::chrono::steady_clock::now();
  fs::path dir = fs::temp_directory_path() / "acceptance_golden";
  fs::remove_all(dir);
  std::string cmd = std::string("cd ") + FIXTURE_DIR + " && " + CLI_BINARY +
                    " run -c run_config.json -o " + dir.string() +
                    " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  bool ok = rc == 0;
  std::size_t compared = 0;
  fs::path golden = fs::path(GOLDEN_DIR) / "run";
  if (ok && fs::exists(golden)) {
    for (const auto& entry : fs::recursive_directory_iterator(golden)) {
      if (!entry.is_regular_file()) continue;
      fs::path rel = fs::relative(entry.path(), golden);
      if (!fs::exists(dir / rel) || slurp(dir / rel) != slurp(entry.path())) {
        ok = false;
        break;
      }
      ++compared;
    }
  } else {
    ok = false;
  }
  double secs = elapsed_s(start);
  ok = ok && secs < 60.0 && compared >= 12;
  char detail[100];
  std::snprintf(detail, sizeof detail, "%zu files bit-identical in %.1fs", compared,
                secs);
  report(13, "CLI pipeline reproduces frozen outputs", ok, detail);
}

}  // namespace

int main() {
  criterion_recovery();
  criterion_efc_identity();
  criterion_sum_to_one();
  criterion_gradient();
  criterion_profile();
  criterion_bootstrap();
  criterion_delta_moments();
  criterion_score_size();
  criterion_influence();
  criterion_variance_ratio();
  criterion_imputation();
  criterion_equivariance();
  criterion_cli_golden();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 13 criteria passed\n");
  return 0;
}
