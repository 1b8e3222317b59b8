#include "soillead/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace soillead {

SiteType site_type_from_string(const std::string& s) {
  if (s == "foundation") return SiteType::foundation;
  if (s == "yard") return SiteType::yard;
  if (s == "park") return SiteType::park;
  if (s == "other") return SiteType::other;
  throw std::invalid_argument("unknown site type: " + s);
}

std::string to_string(SiteType t) {
  switch (t) {
    case SiteType::foundation: return "foundation";
    case SiteType::yard: return "yard";
    case SiteType::park: return "park";
    case SiteType::other: return "other";
  }
  return "other";
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<SampleRecord> read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open samples file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty samples file: " + path);
  std::vector<SampleRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string id, year, conc, site;
    if (!std::getline(ss, id, ',') || !std::getline(ss, year, ',') ||
        !std::getline(ss, conc, ',') || !std::getline(ss, site)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `id,year_built,concentration,site_type`");
    }
    SampleRecord rec;
    rec.id = trim(id);
    try {
      rec.year_built = std::stoi(trim(year));
      rec.concentration = std::stod(trim(conc));
      rec.site_type = site_type_from_string(trim(site));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed row (" + e.what() + ")");
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw std::runtime_error("samples file has no rows: " + path);
  return out;
}

void write_samples_csv(const std::vector<SampleRecord>& samples,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write samples file: " + path);
  f.precision(17);
  f << "id,year_built,concentration,site_type\n";
  for (const auto& s : samples) {
    f << s.id << "," << s.year_built << "," << s.concentration << ","
      << to_string(s.site_type) << "\n";
  }
}

Dataset join_samples(const std::vector<SampleRecord>& samples,
                     const CumulativeExposure& paint,
                     const CumulativeExposure& gas,
                     const std::vector<SiteType>& site_filter) {
  Dataset out;
  for (const auto& s : samples) {
    if (!site_filter.empty() &&
        std::find(site_filter.begin(), site_filter.end(), s.site_type) ==
            site_filter.end()) {
      out.exclusions.push_back({s.id, "filtered site type " + to_string(s.site_type)});
      continue;
    }
    if (s.concentration <= 0.0) {
      out.exclusions.push_back({s.id, "nonpositive concentration"});
      continue;
    }
    if (!paint.contains(s.year_built) || !gas.contains(s.year_built)) {
      out.exclusions.push_back(
          {s.id, "pre-domain year " + std::to_string(s.year_built)});
      continue;
    }
    out.records.push_back(s);
    out.points.push_back({paint.value(s.year_built), gas.value(s.year_built),
                          std::log(s.concentration), s.year_built});
  }
  return out;
}

}  // namespace soillead
