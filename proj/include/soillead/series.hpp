#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace soillead {

/// Yearly consumption series on a contiguous year domain.
/// Missing values are explicit; they are distinct from zeros set by policy.
class YearlySeries {
 public:
  YearlySeries(int first_year, std::vector<std::optional<double>> amounts);

  int first_year() const { return first_year_; }
  int last_year() const { return first_year_ + static_cast<int>(amounts_.size()) - 1; }
  bool contains(int year) const {
    return year >= first_year() && year <= last_year();
  }
  const std::optional<double>& at(int year) const;
  void set(int year, std::optional<double> amount);

  bool fully_observed() const;
  bool fully_observed(int from, int to) const;
  std::vector<int> missing_years() const;

  /// Widen the domain to [first, last], filling new years with zero.
  YearlySeries extended(int first, int last) const;

  const std::vector<std::optional<double>>& amounts() const { return amounts_; }

 private:
  int first_year_;
  std::vector<std::optional<double>> amounts_;
};

/// Zeroing bounds and scaling applied before cumulation.
/// Years <= zero_before or >= zero_after are set to zero; the rest are scaled.
struct SeriesPolicy {
  std::optional<int> zero_before;
  std::optional<int> zero_after;
  double scale = 1.0;
};

/// Tail sums C_y = sum_{i=y}^{Y} s_i for y in [y_min, Y].
class CumulativeExposure {
 public:
  CumulativeExposure(int measurement_year, int y_min, std::vector<double> values);

  int measurement_year() const { return measurement_year_; }
  int y_min() const { return y_min_; }
  bool contains(int year) const {
    return year >= y_min_ && year <= measurement_year_;
  }
  double value(int year) const;
  const std::vector<double>& values() const { return values_; }

 private:
  int measurement_year_;
  int y_min_;
  std::vector<double> values_;  // index 0 <-> y_min
};

struct ImputationResult {
  double slope = 0.0;
  double r_squared = 0.0;  // uncentered: 1 - RSS / sum(t^2)
  YearlySeries filled;
  std::vector<int> imputed_years;
};

struct YearRange {
  int first;
  int last;
};

YearlySeries apply_policy(const YearlySeries& series, const SeriesPolicy& policy);

/// Regression through the origin of target on reference over fit_window;
/// missing target years are filled with slope * reference.
ImputationResult impute_proportional(const YearlySeries& target,
                                     const YearlySeries& reference,
                                     YearRange fit_window);

CumulativeExposure cumulate(const YearlySeries& series, int measurement_year,
                            int y_min);

/// CSV: header `year,amount`; empty amount field = missing.
YearlySeries read_series_csv(const std::string& path);
void write_series_csv(const YearlySeries& series, const std::string& path);

/// CSV: header `year,cumulative`.
void write_exposure_csv(const CumulativeExposure& exposure, const std::string& path);
CumulativeExposure read_exposure_csv(const std::string& path);

}  // namespace soillead
