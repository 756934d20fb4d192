#include "spatconf/archive.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "spatconf/errors.hpp"

namespace spatconf {

using nlohmann::json;

std::string scenario_to_json(const ConfoundingScenario& s) {
  json j = {{"phi_x", s.phi_x},         {"phi_w", s.phi_w},   {"delta", s.delta},
            {"sigma2_x", s.sigma2_x},   {"sigma2_w", s.sigma2_w},
            {"sigma2_eps", s.sigma2_eps}, {"beta0", s.beta0}, {"beta_x", s.beta_x}};
  return j.dump();
}

ConfoundingScenario scenario_from_json(const std::string& text) {
  ConfoundingScenario s;
  try {
    const json j = json::parse(text);
    s.phi_x = j.at("phi_x").get<double>();
    s.phi_w = j.at("phi_w").get<double>();
    s.delta = j.at("delta").get<double>();
    s.sigma2_x = j.at("sigma2_x").get<double>();
    s.sigma2_w = j.at("sigma2_w").get<double>();
    s.sigma2_eps = j.at("sigma2_eps").get<double>();
    s.beta0 = j.at("beta0").get<double>();
    s.beta_x = j.at("beta_x").get<double>();
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("bad scenario JSON: {}", e.what()));
  }
  s.validate();
  return s;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.9g}", v);
}

void write_replicate_archive(std::ostream& out, const ReplicateArchive& a) {
  const std::size_t n = a.sites.size();
  out << "# scenario " << scenario_to_json(a.scenario) << '\n';
  out << "# seed " << a.seed << '\n';
  out << "# n " << n << '\n';
  out << "replicate,site,easting,northing,x,w,y\n";
  for (std::size_t r = 0; r < a.replicates.size(); ++r) {
    const auto& rep = a.replicates[r];
    if (static_cast<std::size_t>(rep.x.size()) != n) {
      throw UsageError("replicate length does not match the site count");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      out << r << ',' << i << ',' << format_real(a.sites[i].easting) << ','
          << format_real(a.sites[i].northing) << ',' << format_real(rep.x(e)) << ','
          << format_real(rep.w(e)) << ',' << format_real(rep.y(e)) << '\n';
    }
  }
}

ReplicateArchive read_replicate_archive(std::istream& in) {
  ReplicateArchive a;
  std::string line;
  std::size_t n = 0;
  bool have_scenario = false, have_n = false;
  while (in.peek() == '#' && std::getline(in, line)) {
    std::istringstream ls(line.substr(1));
    std::string key;
    ls >> key;
    std::string rest;
    std::getline(ls >> std::ws, rest);
    if (key == "scenario") {
      a.scenario = scenario_from_json(rest);
      have_scenario = true;
    } else if (key == "seed") {
      a.seed = std::stoull(rest);
    } else if (key == "n") {
      n = std::stoul(rest);
      have_n = true;
    }
  }
  if (!have_scenario || !have_n) throw UsageError("archive header is incomplete");
  if (!std::getline(in, line) || line.rfind("replicate,", 0) != 0) {
    throw UsageError("archive column header missing");
  }
  std::map<std::size_t, std::vector<std::array<double, 5>>> rows;
  long lineno = 4;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw IngestError("archive row has wrong arity", lineno, "");
    try {
      const std::size_t r = std::stoul(cells[0]);
      const std::size_t i = std::stoul(cells[1]);
      auto& block = rows[r];
      if (i != block.size()) throw IngestError("archive rows out of order", lineno, "site");
      block.push_back({std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                       std::stod(cells[5]), std::stod(cells[6])});
    } catch (const std::logic_error&) {
      throw IngestError("non-numeric archive cell", lineno, "");
    }
  }
  std::vector<Location> locs;
  for (auto& [r, block] : rows) {
    if (block.size() != n) throw UsageError(fmt::format("replicate {} is incomplete", r));
    FieldReplicate rep;
    rep.x.resize(static_cast<Eigen::Index>(n));
    rep.w.resize(static_cast<Eigen::Index>(n));
    rep.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      if (locs.size() < n) locs.push_back({block[i][0], block[i][1]});
      rep.x(e) = block[i][2];
      rep.w(e) = block[i][3];
      rep.y(e) = block[i][4];
    }
    a.replicates.push_back(std::move(rep));
  }
  a.sites = SiteSet(std::move(locs));
  return a;
}

}  // namespace spatconf
