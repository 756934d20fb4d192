#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <spatconf/rng.hpp>
#include <spatconf/spatial_core.hpp>

namespace testutil {

inline spatconf::SiteSet uniform_sites(std::size_t n, std::uint64_t seed) {
  spatconf::Rng rng(seed);
  std::vector<spatconf::Location> locs(n);
  for (auto& l : locs) l = {spatconf::draw_uniform(rng), spatconf::draw_uniform(rng)};
  return spatconf::SiteSet(std::move(locs));
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("SPATCONF_TMP");
  std::filesystem::path base = env ? env : std::filesystem::temp_directory_path() / "spatconf_tests";
  auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
