#include "soillead/simulator.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "soillead/inference.hpp"  // derive_stream

namespace soillead {

double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller, one value per call so draw counts stay predictable
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double lognormal_from_mean_sd(double mean, double sd, double z) {
  if (mean <= 0.0) throw std::invalid_argument("lognormal: mean must be positive");
  if (sd < 0.0) throw std::invalid_argument("lognormal: negative SD");
  if (sd == 0.0) return mean;
  double s2 = std::log(1.0 + (sd / mean) * (sd / mean));
  double mu = std::log(mean) - 0.5 * s2;
  return std::exp(mu + std::sqrt(s2) * z);
}

YearlySeries yearly_from_cumulative(const CumulativeExposure& exposure) {
  int first = exposure.y_min();
  int last = exposure.measurement_year();
  std::vector<std::optional<double>> amounts(static_cast<std::size_t>(last - first + 1));
  for (int y = first; y <= last; ++y) {
    double c = exposure.value(y);
    double next = y < last ? exposure.value(y + 1) : 0.0;
    amounts[static_cast<std::size_t>(y - first)] = std::max(c - next, 0.0);
  }
  return YearlySeries(first, std::move(amounts));
}

double draw_delta(const YearlySeries& window, const ErrorConfig& err,
                  const std::vector<double>& epsilon,
                  const std::vector<double>& delta) {
  (void)err;
  double num = 0.0, den = 0.0;
  for (int y = window.first_year(); y <= window.last_year(); ++y) {
    std::size_t i = static_cast<std::size_t>(y - window.first_year());
    double w = window.at(y).value_or(0.0);
    num += w * epsilon[i] * (delta.empty() ? 1.0 : delta[i]);
    den += w;
  }
  if (den == 0.0) return 1.0;  // no exposure: the term vanishes anyway
  return num / den;
}

namespace {

constexpr std::uint64_t kSharedPaintStream = 0xB5EA0001ULL;
constexpr std::uint64_t kSharedGasStream = 0xB5EA0002ULL;
constexpr std::uint64_t kSampleStreamTag = 17;

std::vector<double> draw_epsilon_series(std::mt19937_64& rng, std::size_t count,
                                        const ErrorConfig& err) {
  std::vector<double> eps(count);
  for (auto& e : eps) {
    e = lognormal_from_mean_sd(err.epsilon_mean, err.epsilon_sd, standard_normal(rng));
  }
  return eps;
}

std::vector<double> draw_delta_series(std::mt19937_64& rng, std::size_t count,
                                      const ErrorConfig& err) {
  if (err.delta_sd <= 0.0) return {};
  std::vector<double> d(count);
  for (auto& v : d) {
    v = lognormal_from_mean_sd(1.0, err.delta_sd, standard_normal(rng));
  }
  return d;
}

}  // namespace

std::vector<SampleRecord> simulate(const SimConfig& sim, const ErrorConfig* err) {
  if (sim.sigma < 0.0) throw std::invalid_argument("simulate: negative sigma");
  if (!sim.theta.nonnegative()) throw std::invalid_argument("simulate: negative theta");
  if (sim.n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  double total_weight = 0.0;
  for (const auto& [year, weight] : sim.year_weights) {
    if (weight < 0.0) throw std::invalid_argument("simulate: negative year weight");
    if (!sim.paint.contains(year) || !sim.gas.contains(year)) {
      throw std::invalid_argument("simulate: year " + std::to_string(year) +
                                  " outside exposure domain");
    }
    total_weight += weight;
  }
  if (total_weight <= 0.0) {
    throw std::invalid_argument("simulate: degenerate year distribution");
  }

  YearlySeries paint_yearly = yearly_from_cumulative(sim.paint);
  YearlySeries gas_yearly = yearly_from_cumulative(sim.gas);
  const int Y = sim.paint.measurement_year();

  // shared measurement-error series, one per predictor
  std::vector<double> shared_eps_p, shared_eps_g;
  if (err && err->shared) {
    std::size_t np = static_cast<std::size_t>(Y - paint_yearly.first_year() + 1);
    std::size_t ng = static_cast<std::size_t>(sim.gas.measurement_year() -
                                              gas_yearly.first_year() + 1);
    std::mt19937_64 rng_p(derive_stream(sim.seed, kSharedPaintStream));
    std::mt19937_64 rng_g(derive_stream(sim.seed, kSharedGasStream));
    shared_eps_p = draw_epsilon_series(rng_p, np, *err);
    shared_eps_g = draw_epsilon_series(rng_g, ng, *err);
  }

  auto suffix = [](const YearlySeries& s, int from) {
    std::vector<std::optional<double>> amounts;
    for (int y = from; y <= s.last_year(); ++y) amounts.push_back(s.at(y));
    return YearlySeries(from, std::move(amounts));
  };

  std::vector<SampleRecord> out;
  out.reserve(static_cast<std::size_t>(sim.n));
  const std::uint64_t sample_base = derive_stream(sim.seed, kSampleStreamTag);
  for (int j = 0; j < sim.n; ++j) {
    std::mt19937_64 rng(derive_stream(sample_base, static_cast<std::uint64_t>(j)));

    double u = uniform01(rng) * total_weight;
    int year = sim.year_weights.back().first;
    double acc = 0.0;
    for (const auto& [yw, weight] : sim.year_weights) {
      acc += weight;
      if (u <= acc) {
        year = yw;
        break;
      }
    }

    double delta_p = 1.0, delta_g = 1.0;
    if (err) {
      YearlySeries wp = suffix(paint_yearly, std::max(year, paint_yearly.first_year()));
      std::size_t np = static_cast<std::size_t>(wp.last_year() - wp.first_year() + 1);
      std::vector<double> eps_p;
      if (err->shared) {
        std::size_t offset = static_cast<std::size_t>(wp.first_year() -
                                                      paint_yearly.first_year());
        eps_p.assign(shared_eps_p.begin() + static_cast<long>(offset),
                     shared_eps_p.end());
      } else {
        eps_p = draw_epsilon_series(rng, np, *err);
      }
      std::vector<double> d_p = draw_delta_series(rng, np, *err);
      delta_p = draw_delta(wp, *err, eps_p, d_p);

      YearlySeries wg = suffix(gas_yearly, std::max(year, gas_yearly.first_year()));
      std::size_t ng = static_cast<std::size_t>(wg.last_year() - wg.first_year() + 1);
      std::vector<double> eps_g;
      if (err->shared) {
        std::size_t offset = static_cast<std::size_t>(wg.first_year() -
                                                      gas_yearly.first_year());
        eps_g.assign(shared_eps_g.begin() + static_cast<long>(offset),
                     shared_eps_g.end());
      } else {
        eps_g = draw_epsilon_series(rng, ng, *err);
      }
      std::vector<double> d_g = draw_delta_series(rng, ng, *err);
      delta_g = draw_delta(wg, *err, eps_g, d_g);
    }

    double eta = sim.theta.background +
                 sim.theta.paint_rate * sim.paint.value(year) * delta_p +
                 sim.theta.gas_rate * sim.gas.value(year) * delta_g;
    if (eta <= 0.0) {
      throw std::runtime_error("simulate: nonpositive mean at year " +
                               std::to_string(year));
    }
    double log_l = std::log(eta) + sim.sigma * standard_normal(rng);

    SampleRecord rec;
    rec.id = "sim-" + std::to_string(j);
    rec.year_built = year;
    rec.concentration = std::exp(log_l);
    rec.site_type = SiteType::foundation;
    out.push_back(std::move(rec));
  }
  return out;
}

DeltaMoments delta_moments(const YearlySeries& window, const ErrorConfig& err) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = window.first_year(); y <= window.last_year(); ++y) {
    if (!window.at(y)) {
      throw std::invalid_argument("delta_moments: missing value in window");
    }
    sum += *window.at(y);
    ++count;
  }
  if (sum <= 0.0) {
    throw std::invalid_argument("delta_moments: window sums to zero");
  }
  double a = static_cast<double>(count);
  double mean_w = sum / a;
  double ss = 0.0;
  for (int y = window.first_year(); y <= window.last_year(); ++y) {
    double d = *window.at(y) - mean_w;
    ss += d * d;
  }
  // population CV: makes Var(Delta) = sigma_eps^2 * sum(w^2)/sum(w)^2 exact
  double c2 = count > 1 ? (ss / a) / (mean_w * mean_w) : 0.0;
  DeltaMoments out;
  out.mean = err.epsilon_mean;
  out.variance = (c2 + 1.0) * err.epsilon_sd * err.epsilon_sd / a;
  return out;
}

double delta_covariance(const YearlySeries& series, int y_prime, int y,
                        const ErrorConfig& err) {
  if (!err.shared) {
    throw std::invalid_argument("delta_covariance: requires shared errors");
  }
  if (y_prime > y) {
    throw std::invalid_argument("delta_covariance: requires y_prime <= y");
  }
  auto window_sum = [&](int from) {
    double s = 0.0;
    for (int i = from; i <= series.last_year(); ++i) {
      if (!series.at(i)) {
        throw std::invalid_argument("delta_covariance: missing value in window");
      }
      s += *series.at(i);
    }
    return s;
  };
  double s_y = window_sum(y);
  double s_yp = window_sum(y_prime);
  if (s_y <= 0.0 || s_yp <= 0.0) {
    throw std::invalid_argument("delta_covariance: window sums to zero");
  }
  std::vector<std::optional<double>> tail;
  for (int i = y; i <= series.last_year(); ++i) tail.push_back(series.at(i));
  DeltaMoments m = delta_moments(YearlySeries(y, std::move(tail)), err);
  return m.variance * s_y / s_yp;
}

}  // namespace soillead
