#include "soillead/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace soillead {

YearlySeries::YearlySeries(int first_year, std::vector<std::optional<double>> amounts)
    : first_year_(first_year), amounts_(std::move(amounts)) {
  if (amounts_.empty()) {
    throw std::invalid_argument("YearlySeries: empty series");
  }
  for (std::size_t i = 0; i < amounts_.size(); ++i) {
    if (amounts_[i] && *amounts_[i] < 0.0) {
      throw std::invalid_argument("YearlySeries: negative amount in year " +
                                  std::to_string(first_year_ + static_cast<int>(i)));
    }
  }
}

const std::optional<double>& YearlySeries::at(int year) const {
  if (!contains(year)) {
    throw std::out_of_range("YearlySeries: year " + std::to_string(year) +
                            " outside domain");
  }
  return amounts_[static_cast<std::size_t>(year - first_year_)];
}

void YearlySeries::set(int year, std::optional<double> amount) {
  if (!contains(year)) {
    throw std::out_of_range("YearlySeries: year " + std::to_string(year) +
                            " outside domain");
  }
  if (amount && *amount < 0.0) {
    throw std::invalid_argument("YearlySeries: negative amount");
  }
  amounts_[static_cast<std::size_t>(year - first_year_)] = amount;
}

bool YearlySeries::fully_observed() const {
  return fully_observed(first_year(), last_year());
}

bool YearlySeries::fully_observed(int from, int to) const {
  for (int y = from; y <= to; ++y) {
    if (!contains(y) || !at(y)) return false;
  }
  return true;
}

std::vector<int> YearlySeries::missing_years() const {
  std::vector<int> out;
  for (int y = first_year(); y <= last_year(); ++y) {
    if (!at(y)) out.push_back(y);
  }
  return out;
}

YearlySeries YearlySeries::extended(int first, int last) const {
  if (first > first_year() || last < last_year()) {
    throw std::invalid_argument("YearlySeries::extended: new domain must contain old");
  }
  std::vector<std::optional<double>> amounts(static_cast<std::size_t>(last - first + 1),
                                             std::optional<double>(0.0));
  for (int y = first_year(); y <= last_year(); ++y) {
    amounts[static_cast<std::size_t>(y - first)] = at(y);
  }
  return YearlySeries(first, std::move(amounts));
}

CumulativeExposure::CumulativeExposure(int measurement_year, int y_min,
                                       std::vector<double> values)
    : measurement_year_(measurement_year), y_min_(y_min), values_(std::move(values)) {
  if (y_min_ > measurement_year_) {
    throw std::invalid_argument("CumulativeExposure: y_min > measurement year");
  }
  if (values_.size() != static_cast<std::size_t>(measurement_year_ - y_min_ + 1)) {
    throw std::invalid_argument("CumulativeExposure: value count does not match domain");
  }
  for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
    if (values_[i] + 1e-12 < values_[i + 1]) {
      throw std::invalid_argument("CumulativeExposure: values must be nonincreasing");
    }
  }
  for (double v : values_) {
    if (v < 0.0) throw std::invalid_argument("CumulativeExposure: negative value");
  }
}

double CumulativeExposure::value(int year) const {
  if (!contains(year)) {
    throw std::out_of_range("CumulativeExposure: year " + std::to_string(year) +
                            " outside domain");
  }
  return values_[static_cast<std::size_t>(year - y_min_)];
}

YearlySeries apply_policy(const YearlySeries& series, const SeriesPolicy& policy) {
  if (policy.scale <= 0.0) {
    throw std::invalid_argument("SeriesPolicy: scale must be positive");
  }
  if (policy.zero_before && policy.zero_after &&
      *policy.zero_before > *policy.zero_after) {
    throw std::invalid_argument("SeriesPolicy: zero_before > zero_after");
  }
  std::vector<std::optional<double>> amounts = series.amounts();
  for (std::size_t i = 0; i < amounts.size(); ++i) {
    int year = series.first_year() + static_cast<int>(i);
    bool zeroed = (policy.zero_before && year <= *policy.zero_before) ||
                  (policy.zero_after && year >= *policy.zero_after);
    if (zeroed) {
      amounts[i] = 0.0;
    } else if (amounts[i]) {
      amounts[i] = *amounts[i] * policy.scale;
    }
  }
  return YearlySeries(series.first_year(), std::move(amounts));
}

ImputationResult impute_proportional(const YearlySeries& target,
                                     const YearlySeries& reference,
                                     YearRange fit_window) {
  if (fit_window.first > fit_window.last) {
    throw std::invalid_argument("impute_proportional: empty fit window");
  }
  double str = 0.0, srr = 0.0, stt = 0.0;
  for (int y = fit_window.first; y <= fit_window.last; ++y) {
    if (!target.contains(y) || !target.at(y) || !reference.contains(y) ||
        !reference.at(y)) {
      throw std::invalid_argument(
          "impute_proportional: fit window not fully observed at year " +
          std::to_string(y));
    }
    double t = *target.at(y);
    double r = *reference.at(y);
    str += t * r;
    srr += r * r;
    stt += t * t;
  }
  if (srr == 0.0) {
    throw std::invalid_argument("impute_proportional: reference is zero on fit window");
  }
  double slope = str / srr;
  double rss = 0.0;
  for (int y = fit_window.first; y <= fit_window.last; ++y) {
    double e = *target.at(y) - slope * *reference.at(y);
    rss += e * e;
  }
  double r_squared = stt > 0.0 ? 1.0 - rss / stt : 1.0;

  ImputationResult result{slope, r_squared, target, {}};
  for (int y = target.first_year(); y <= target.last_year(); ++y) {
    if (!target.at(y)) {
      if (!reference.contains(y) || !reference.at(y)) {
        throw std::invalid_argument(
            "impute_proportional: reference missing at year " + std::to_string(y));
      }
      result.filled.set(y, slope * *reference.at(y));
      result.imputed_years.push_back(y);
    }
  }
  return result;
}

CumulativeExposure cumulate(const YearlySeries& series, int measurement_year,
                            int y_min) {
  if (y_min > measurement_year) {
    throw std::invalid_argument("cumulate: y_min > measurement year");
  }
  for (int y = y_min; y <= measurement_year; ++y) {
    if (!series.contains(y) || !series.at(y)) {
      throw std::invalid_argument("cumulate: missing value in year " +
                                  std::to_string(y));
    }
  }
  std::vector<double> values(static_cast<std::size_t>(measurement_year - y_min + 1));
  double tail = 0.0;
  for (int y = measurement_year; y >= y_min; --y) {
    tail += *series.at(y);
    values[static_cast<std::size_t>(y - y_min)] = tail;
  }
  return CumulativeExposure(measurement_year, y_min, std::move(values));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

YearlySeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open series file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty series file: " + path);
  std::vector<std::pair<int, std::optional<double>>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `year,amount`");
    }
    int year = 0;
    std::optional<double> amount;
    try {
      year = std::stoi(trim(fields[0]));
      std::string a = trim(fields[1]);
      if (!a.empty()) amount = std::stod(a);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed row");
    }
    rows.emplace_back(year, amount);
  }
  if (rows.empty()) throw std::runtime_error("series file has no rows: " + path);
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  int first = rows.front().first;
  int last = rows.back().first;
  std::vector<std::optional<double>> amounts(static_cast<std::size_t>(last - first + 1));
  for (const auto& [year, amount] : rows) {
    auto& slot = amounts[static_cast<std::size_t>(year - first)];
    slot = amount;
  }
  // years absent from the file inside [first, last] stay missing
  return YearlySeries(first, std::move(amounts));
}

void write_series_csv(const YearlySeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write series file: " + path);
  out << "year,amount\n";
  out.precision(17);
  for (int y = series.first_year(); y <= series.last_year(); ++y) {
    out << y << ",";
    if (series.at(y)) out << *series.at(y);
    out << "\n";
  }
}

void write_exposure_csv(const CumulativeExposure& exposure, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write exposure file: " + path);
  out << "year,cumulative\n";
  out.precision(17);
  for (int y = exposure.y_min(); y <= exposure.measurement_year(); ++y) {
    out << y << "," << exposure.value(y) << "\n";
  }
}

CumulativeExposure read_exposure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open exposure file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty exposure file: " + path);
  std::vector<std::pair<int, double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `year,cumulative`");
    }
    rows.emplace_back(std::stoi(trim(fields[0])), std::stod(trim(fields[1])));
  }
  if (rows.empty()) throw std::runtime_error("exposure file has no rows: " + path);
  std::sort(rows.begin(), rows.end());
  int y_min = rows.front().first;
  int y_max = rows.back().first;
  if (rows.size() != static_cast<std::size_t>(y_max - y_min + 1)) {
    throw std::runtime_error("exposure file has gaps: " + path);
  }
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& [year, value] : rows) values.push_back(value);
  return CumulativeExposure(y_max, y_min, std::move(values));
}

}  // namespace soillead
