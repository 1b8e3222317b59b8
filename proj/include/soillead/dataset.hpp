#pragma once

#include <string>
#include <vector>

#include "soillead/model.hpp"
#include "soillead/series.hpp"

namespace soillead {

enum class SiteType { foundation, yard, park, other };

SiteType site_type_from_string(const std::string& s);
std::string to_string(SiteType t);

struct SampleRecord {
  std::string id;
  int year_built = 0;
  double concentration = 0.0;  // ppm, must be positive to enter the model
  SiteType site_type = SiteType::other;
};

struct Exclusion {
  std::string id;
  std::string reason;
};

struct Dataset {
  std::vector<SampleRecord> records;   // retained samples, aligned with points
  std::vector<DesignPoint> points;
  std::vector<Exclusion> exclusions;
};

/// CSV: header `id,year_built,concentration,site_type`.
std::vector<SampleRecord> read_samples_csv(const std::string& path);
void write_samples_csv(const std::vector<SampleRecord>& samples,
                       const std::string& path);

/// Join samples to exposures by year built. Out-of-domain or nonpositive
/// records are excluded with a per-record reason, never silently dropped.
Dataset join_samples(const std::vector<SampleRecord>& samples,
                     const CumulativeExposure& paint,
                     const CumulativeExposure& gas,
                     const std::vector<SiteType>& site_filter = {});

}  // namespace soillead
