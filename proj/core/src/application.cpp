#include "spatconf/application.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "spatconf/archive.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/principal_basis.hpp"
#include "spatconf/rng.hpp"

namespace spatconf {

double derive_rh(double temp_c, double dewpoint_c, std::string* warning) {
  if (dewpoint_c > temp_c) {
    if (warning) {
      *warning = fmt::format("dew point {:.4g} C exceeds temperature {:.4g} C; RH clamped to 100",
                             dewpoint_c, temp_c);
    }
    return 100.0;
  }
  return 100.0 * std::exp(17.625 * dewpoint_c / (243.04 + dewpoint_c) -
                          17.625 * temp_c / (243.04 + temp_c));
}

namespace {

std::string lower_trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r\""));
  s.erase(s.find_last_not_of(" \t\r\"") + 1);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

}  // namespace

ObservationTable ingest(std::istream& in, const IngestOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError("input is empty", 1, "");
  const auto header = split(line, options.delimiter);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower_trim(header[i])] = i;

  const std::vector<std::string> required = {"lon", "lat", "o3", "nox", "u10",
                                             "v10", "temp", "ssr", "voc"};
  for (const auto& name : required) {
    if (!col.count(name)) throw IngestError(fmt::format("missing column '{}'", name), 1, name);
  }
  const bool has_rh = col.count("rh") > 0;
  const bool has_dew = col.count("dewpoint") > 0;
  if (!has_rh && !has_dew) throw IngestError("need an 'rh' or a 'dewpoint' column", 1, "rh");

  const double offset = options.unit == TemperatureUnit::Kelvin ? 273.15 : 0.0;
  ObservationTable table;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (lower_trim(line).empty()) continue;
    const auto cells = split(line, options.delimiter);
    auto get = [&](const std::string& name) {
      const std::size_t idx = col.at(name);
      if (idx >= cells.size()) throw IngestError("row is shorter than the header", lineno, name);
      const std::string text = lower_trim(cells[idx]);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (text.empty() || used != text.size() || !std::isfinite(v)) {
        throw IngestError(fmt::format("non-numeric value '{}'", cells[idx]), lineno, name);
      }
      return v;
    };
    Observation o;
    o.lon = get("lon");
    o.lat = get("lat");
    o.o3 = get("o3");
    o.nox = get("nox");
    o.u10 = get("u10");
    o.v10 = get("v10");
    o.temp = get("temp") - offset;
    o.ssr = get("ssr");
    o.voc = get("voc");
    if (!(o.o3 > 0.0)) throw IngestError("O3 concentration must be positive", lineno, "o3");
    if (!(o.nox > 0.0)) throw IngestError("NOx concentration must be positive", lineno, "nox");
    if (has_rh) {
      o.rh = get("rh");
    } else {
      std::string warning;
      o.rh = derive_rh(o.temp, get("dewpoint") - offset, &warning);
      if (!warning.empty()) table.warnings.push_back(fmt::format("line {}: {}", lineno, warning));
    }
    table.rows.push_back(o);
  }
  if (table.rows.empty()) throw IngestError("no data rows", lineno, "");
  return table;
}

ObservationTable ingest(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot read {}", path));
  return ingest(in, options);
}

AppReport run_application(const ObservationTable& table, const AppOptions& options) {
  const auto n = static_cast<Eigen::Index>(table.n());
  if (n < 12) throw UsageError("the application needs at least 12 sites");
  AppReport report;
  report.n = table.n();
  report.warnings = table.warnings;

  Vector y(n), x(n);
  Matrix covariates(n, 6);
  double lon_min = table.rows[0].lon, lon_max = lon_min;
  double lat_min = table.rows[0].lat, lat_max = lat_min;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = table.rows[static_cast<std::size_t>(i)];
    y(i) = std::log(o.o3);
    x(i) = std::log(o.nox);
    covariates.row(i) << o.u10, o.v10, o.temp, o.ssr, o.voc, o.rh;
    lon_min = std::min(lon_min, o.lon);
    lon_max = std::max(lon_max, o.lon);
    lat_min = std::min(lat_min, o.lat);
    lat_max = std::max(lat_max, o.lat);
  }
  if (!(lon_max > lon_min) || !(lat_max > lat_min)) {
    throw UsageError("sites must span both coordinate axes");
  }
  std::vector<Location> locs;
  locs.reserve(table.n());
  for (const auto& o : table.rows) {
    locs.push_back({(o.lon - lon_min) / (lon_max - lon_min), (o.lat - lat_min) / (lat_max - lat_min)});
  }
  const SiteSet sites(std::move(locs));

  {
    Matrix d(n, 8);
    d.col(0).setOnes();
    d.col(1) = x;
    d.rightCols(6) = covariates;
    const auto fit = linear_fit(d, y);
    const double dof = static_cast<double>(n - 8);
    const double se = std::sqrt(fit.rss / dof * fit.unscaled_covariance(1, 1));
    const double t = student_t_quantile(0.975, dof);
    report.rows.push_back({MethodId::OLS, "full", fit.coef(1), fit.coef(1) - t * se,
                           fit.coef(1) + t * se, std::nullopt, ""});
  }

  std::vector<MethodId> methods = options.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  std::optional<PrincipalBasis> pkf;
  std::optional<TprsBasis> tprs;
  for (MethodId m : methods) {
    const std::uint64_t seed = derive_seed(options.seed, {static_cast<std::uint64_t>(m)});
    FitResult fit;
    switch (m) {
      case MethodId::OLS: fit = fit_ols(y, x); break;
      case MethodId::SRE: {
        SreConfig c = options.sre;
        c.seed = seed;
        fit = fit_sre(y, x, sites, c);
        break;
      }
      case MethodId::SpatialTP:
      case MethodId::SpatialPlusFx:
      case MethodId::SpatialPlus:
      case MethodId::GSEM:
      case MethodId::KS:
        if (!tprs) tprs = tprs_basis(sites, required_tprs_rank(table.n(), options.spline));
        fit = fit_spline_family(m, y, x, *tprs, options.spline);
        break;
      case MethodId::SS_fv:
      case MethodId::SS_nmig:
      case MethodId::SS_mom: {
        if (!pkf) pkf = principal_kriging_basis(sites, NullSpaceType::Type1);
        SsPriorConfig prior = options.ss_prior;
        prior.family = m == MethodId::SS_fv ? PriorFamily::FV
                       : m == MethodId::SS_nmig ? PriorFamily::NMIG
                                                : PriorFamily::MOM;
        ChainConfig c = options.chain;
        c.seed = seed;
        const auto s = summarize(fit_spike_slab(y, x, pkf->B, prior, c));
        fit.method = m;
        fit.beta_x_hat = s.beta_x_mean;
        fit.lo = s.lo;
        fit.hi = s.hi;
        fit.edf = static_cast<double>(s.edf);
        break;
      }
    }
    std::string note;
    if (auto it = fit.diagnostics.find("warning"); it != fit.diagnostics.end()) note = it->second;
    report.rows.push_back({m, "exposure_only", fit.beta_x_hat, fit.lo, fit.hi, fit.edf, note});
  }
  return report;
}

void write_app_report(const std::string& dir, const AppReport& report) {
  const std::string base = dir.empty() ? std::string(".") : dir;
  {
    std::ofstream out(base + "/app_report.csv", std::ios::binary);
    if (!out) throw UsageError(fmt::format("cannot write {}/app_report.csv", base));
    out << "method,variant,estimate,lo,hi,edf\n";
    for (const auto& r : report.rows) {
      out << to_string(r.method) << ',' << r.variant << ',' << format_real(r.estimate) << ','
          << format_real(r.lo) << ',' << format_real(r.hi) << ','
          << (r.edf ? format_real(*r.edf) : std::string("NA")) << '\n';
    }
  }
  nlohmann::json j;
  j["n"] = report.n;
  j["warnings"] = report.warnings;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row = {{"method", to_string(r.method)}, {"variant", r.variant},
                          {"estimate", r.estimate},        {"lo", r.lo},
                          {"hi", r.hi}};
    row["edf"] = r.edf ? nlohmann::json(*r.edf) : nlohmann::json(nullptr);
    if (!r.note.empty()) row["note"] = r.note;
    j["rows"].push_back(row);
  }
  std::ofstream out(base + "/app_report.json", std::ios::binary);
  if (!out) throw UsageError(fmt::format("cannot write {}/app_report.json", base));
  out << j.dump(2) << '\n';
}

}  // namespace spatconf
