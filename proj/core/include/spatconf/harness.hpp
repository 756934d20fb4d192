#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spatconf/competitors.hpp"
#include "spatconf/simulator.hpp"
#include "spatconf/ss_regression.hpp"

namespace spatconf {

struct StudyConfig {
  std::string preset = "custom";
  std::vector<double> phi_x_grid;
  std::vector<double> phi_w_grid;
  std::size_t n_sites = 500;
  std::size_t lattice = 64;
  std::size_t replicates = 100;
  double delta = 0.5;
  double sigma2_x = 1.0;
  double sigma2_eps = 0.25;
  double beta0 = 1.0;
  double beta_x = 2.0;
  double target_relative_bias = 0.15;
  std::vector<MethodId> methods;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string output_dir;
  // Draw a fresh exposure surface for every replicate instead of once per cell.
  bool resample_exposure = false;
  SqrtMethod sqrt_method = SqrtMethod::SymmetricEigen;
  NullSpaceType ss_nullspace = NullSpaceType::Type1;
  SsPriorConfig ss_prior;
  ChainConfig chain;
  SplineConfig spline;
  SreConfig sre;

  // 10 x 10 grid {0.05, ..., 0.5}^2, R = 100, n = 500, chains 5000 / 1000.
  static StudyConfig paper();
  // 3 x 3 grid {0.05, 0.2, 0.5}^2, R = 30, n = 200, chains 2000 / 500.
  static StudyConfig desk();
  static StudyConfig from_preset(const std::string& name);
  void validate() const;
};

struct StudyCell {
  std::size_t index = 0;
  double phi_x = 0.0;
  double phi_w = 0.0;
  double sigma_w = 0.0;
  double delta_ols = 0.0;
};

struct RawEstimate {
  std::size_t cell = 0;
  MethodId method = MethodId::OLS;
  std::size_t replicate = 0;
  bool ok = false;
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> edf;
  std::uint64_t seed = 0;
  std::string failure;
};

struct CellMetrics {
  std::size_t cell = 0;
  MethodId method = MethodId::OLS;
  std::size_t successes = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  bool flagged = false;
};

// Probability summaries for one method; undefined values stay empty.
using ProbabilityMap = std::map<std::string, std::optional<double>>;

struct BenchmarkTable {
  std::vector<StudyCell> cells;
  std::vector<CellMetrics> metrics;
  std::map<MethodId, ProbabilityMap> probabilities;
  // (cell, method) -> median EDF over successful replicates
  std::map<std::pair<std::size_t, MethodId>, double> median_edf;
};

struct StudyResult {
  std::vector<StudyCell> cells;
  std::vector<RawEstimate> raw;  // ordered by (cell, replicate, method position)
  BenchmarkTable table;
};

// Estimates are rounded to nine significant digits as soon as they are
// produced, so aggregates from memory and from the persisted files agree.
double round_significant(double v);

StudyResult run_study(const StudyConfig& cfg);

BenchmarkTable aggregate(const std::vector<StudyCell>& cells, const std::vector<RawEstimate>& raw,
                         double beta_x, std::size_t replicates);
std::map<MethodId, ProbabilityMap> probability_summaries(const std::vector<StudyCell>& cells,
                                                         const std::vector<RawEstimate>& raw,
                                                         double beta_x);
std::map<std::pair<std::size_t, MethodId>, double> edf_summary(const std::vector<RawEstimate>& raw);

// Persisted layout under cfg.output_dir.
void write_study_config(const std::string& path, const StudyConfig& cfg);
StudyConfig read_study_config(const std::string& path);
void write_cells_csv(const std::string& path, const std::vector<StudyCell>& cells);
std::vector<StudyCell> read_cells_csv(const std::string& path);
void write_raw_csv(const std::string& path, const std::vector<RawEstimate>& raw);
std::vector<RawEstimate> read_raw_csv(const std::string& path);
void write_failures_csv(const std::string& path, const std::vector<RawEstimate>& raw);
void write_table(const std::string& dir, const BenchmarkTable& table);

}  // namespace spatconf
