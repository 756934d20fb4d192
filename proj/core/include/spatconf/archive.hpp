#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spatconf/simulator.hpp"

namespace spatconf {

std::string scenario_to_json(const ConfoundingScenario& scenario);
ConfoundingScenario scenario_from_json(const std::string& text);

// Delimited-text replicate archive. Layout:
//   # scenario <one-line JSON>
//   # seed <study seed>
//   # n <site count>
//   replicate,site,easting,northing,x,w,y
//   <one row per (replicate, site)>
struct ReplicateArchive {
  ConfoundingScenario scenario;
  std::uint64_t seed = 0;
  SiteSet sites;
  std::vector<FieldReplicate> replicates;
};

void write_replicate_archive(std::ostream& out, const ReplicateArchive& archive);
ReplicateArchive read_replicate_archive(std::istream& in);

// Fixed 9-significant-digit rendering used by every text output.
std::string format_real(double v);

}  // namespace spatconf
