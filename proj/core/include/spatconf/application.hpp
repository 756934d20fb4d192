#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spatconf/competitors.hpp"
#include "spatconf/ss_regression.hpp"

namespace spatconf {

// One site of the ozone / nitrogen-oxides table. rh is the relative humidity
// in percent (derived from the dew point when only that is supplied); temp is
// in degrees Celsius after ingestion.
struct Observation {
  double lon = 0.0;
  double lat = 0.0;
  double o3 = 0.0;
  double nox = 0.0;
  double u10 = 0.0;
  double v10 = 0.0;
  double temp = 0.0;
  double ssr = 0.0;
  double voc = 0.0;
  double rh = 0.0;
};

enum class TemperatureUnit { Kelvin, Celsius };

struct IngestOptions {
  // Unit of the temp and dewpoint columns in the file.
  TemperatureUnit unit = TemperatureUnit::Kelvin;
  char delimiter = ',';
};

struct ObservationTable {
  std::vector<Observation> rows;
  std::vector<std::string> warnings;
  std::size_t n() const { return rows.size(); }
};

// Header must name lon, lat, o3, nox, u10, v10, temp, ssr, voc and either rh
// or dewpoint (any order, case-insensitive). Errors carry the 1-based file
// line and the column name.
ObservationTable ingest(std::istream& in, const IngestOptions& options = {});
ObservationTable ingest(const std::string& path, const IngestOptions& options = {});

// Magnus approximation with temperatures in Celsius. A dew point above the
// temperature is clamped to 100 % and reported through `warning`.
double derive_rh(double temp_c, double dewpoint_c, std::string* warning = nullptr);

struct AppOptions {
  std::vector<MethodId> methods = all_methods();
  std::uint64_t seed = 1;
  SsPriorConfig ss_prior;
  ChainConfig chain;
  SplineConfig spline;
  SreConfig sre;
};

struct AppReportRow {
  MethodId method = MethodId::OLS;
  std::string variant;  // "full" or "exposure_only"
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> edf;
  std::string note;
};

struct AppReport {
  std::size_t n = 0;
  std::vector<AppReportRow> rows;
  std::vector<std::string> warnings;
};

// Full covariate model by OLS plus the exposure-only model under every
// requested method. Estimates are log-log slopes (percent change in O3 per
// percent change in NOx).
AppReport run_application(const ObservationTable& table, const AppOptions& options);

void write_app_report(const std::string& dir, const AppReport& report);

}  // namespace spatconf
