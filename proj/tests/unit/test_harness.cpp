#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include <spatconf/errors.hpp>
#include <spatconf/harness.hpp>

#include "test_util.hpp"

using namespace spatconf;

namespace {

StudyConfig tiny_study() {
  StudyConfig c;
  c.phi_x_grid = {0.1, 0.3};
  c.phi_w_grid = {0.3};
  c.n_sites = 40;
  c.lattice = 16;
  c.replicates = 4;
  c.methods = {MethodId::OLS, MethodId::SS_mom};
  c.chain.iterations = 300;
  c.chain.burn_in = 100;
  c.seed = 11;
  return c;
}

RawEstimate est(std::size_t cell, MethodId m, std::size_t rep, double v, std::optional<double> edf = {}) {
  RawEstimate e;
  e.cell = cell;
  e.method = m;
  e.replicate = rep;
  e.ok = true;
  e.estimate = v;
  e.lo = v - 1;
  e.hi = v + 1;
  e.edf = edf;
  return e;
}

// Three cells, two replicates, beta_x = 2. Counts worked out by hand:
// SS beats OLS in (cell 0, rep 0) and (cell 1, rep 0); (cell 1, rep 1) is a tie.
struct Toy {
  std::vector<StudyCell> cells;
  std::vector<RawEstimate> raw;
};

Toy toy() {
  Toy t;
  t.cells = {{0, 0.05, 0.5, 1.0, 0.3}, {1, 0.3, 0.5, 1.0, 0.3}, {2, 0.5, 0.05, 1.0, 0.3}};
  const auto O = MethodId::OLS, S = MethodId::SS_mom;
  t.raw = {est(0, O, 0, 2.5), est(0, S, 0, 2.1, 3), est(0, O, 1, 2.3), est(0, S, 1, 2.4, 5),
           est(1, O, 0, 1.6), est(1, S, 0, 1.9, 1), est(1, O, 1, 2.2), est(1, S, 1, 2.2, 2),
           est(2, O, 0, 2.1), est(2, S, 0, 2.5, 0), est(2, O, 1, 2.0)};
  RawEstimate failed;
  failed.cell = 2;
  failed.method = S;
  failed.replicate = 1;
  failed.failure = "mode search failed";
  t.raw.push_back(failed);
  return t;
}

const CellMetrics& metric(const BenchmarkTable& t, std::size_t cell, MethodId m) {
  for (const auto& cm : t.metrics) {
    if (cm.cell == cell && cm.method == m) return cm;
  }
  throw std::runtime_error("missing metric");
}

}  // namespace

TEST(Harness, RoundSignificantKeepsNineDigits) {
  EXPECT_EQ(round_significant(1.23456789012), 1.23456789);
  EXPECT_EQ(round_significant(-0.000123456789987), -0.00012345679);
  EXPECT_EQ(round_significant(0.0), 0.0);
  EXPECT_TRUE(std::isnan(round_significant(NAN)));
}

TEST(Harness, ToyTableMatchesHandCounts) {
  const auto t = toy();
  const auto table = aggregate(t.cells, t.raw, 2.0, 2);
  const auto& ss = table.probabilities.at(MethodId::SS_mom);
  EXPECT_NEAR(*ss.at("pr_bias_reduced"), 2.0 / 5.0, 1e-15);
  EXPECT_NEAR(*ss.at("pr_bias_reduced_given_phix_lt_phiw"), 0.5, 1e-15);
  EXPECT_NEAR(*ss.at("pr_bias_reduced_given_0.2_lt_phix_lt_phiw"), 0.5, 1e-15);
  EXPECT_EQ(*ss.at("n_pairs"), 5.0);
  EXPECT_EQ(*table.probabilities.at(MethodId::OLS).at("pr_bias_reduced"), 0.0);

  const auto& c0 = metric(table, 0, MethodId::SS_mom);
  EXPECT_NEAR(c0.q1, 0.25 / 0.4, 1e-12);
  EXPECT_NEAR(c0.q2, std::sqrt(0.5), 1e-12);
  const auto& c1 = metric(table, 1, MethodId::SS_mom);
  EXPECT_NEAR(c1.q1, 0.5, 1e-12);
  EXPECT_NEAR(c1.q2, 0.5, 1e-12);
  EXPECT_FALSE(c1.flagged);
  EXPECT_TRUE(metric(table, 2, MethodId::SS_mom).flagged);
  EXPECT_EQ(metric(table, 2, MethodId::SS_mom).successes, 1u);
  EXPECT_EQ(metric(table, 2, MethodId::OLS).q1, 1.0);

  // Cell-level summaries skip the flagged cell.
  EXPECT_EQ(*ss.at("pr_q1_lt_1"), 1.0);
  EXPECT_EQ(*ss.at("pr_q2_lt_0.8_given_phix_lt_phiw"), 1.0);
  EXPECT_EQ(*ss.at("pr_q2_lt_0.8_given_0.2_lt_phix_lt_phiw"), 1.0);
  EXPECT_EQ(*ss.at("pr_q2_gt_1.8"), 0.0);

  EXPECT_EQ(table.median_edf.at({0, MethodId::SS_mom}), 4.0);
  EXPECT_EQ(table.median_edf.at({2, MethodId::SS_mom}), 0.0);
  EXPECT_EQ(table.median_edf.count({0, MethodId::OLS}), 0u);
}

TEST(Harness, EmptyConditioningSetIsUndefined) {
  auto t = toy();
  t.cells = {{0, 0.5, 0.05, 1.0, 0.3}, {1, 0.5, 0.2, 1.0, 0.3}, {2, 0.5, 0.05, 1.0, 0.3}};
  const auto table = aggregate(t.cells, t.raw, 2.0, 2);
  const auto& ss = table.probabilities.at(MethodId::SS_mom);
  EXPECT_FALSE(ss.at("pr_bias_reduced_given_phix_lt_phiw").has_value());
  EXPECT_FALSE(ss.at("pr_q2_lt_0.8_given_0.2_lt_phix_lt_phiw").has_value());
  EXPECT_TRUE(ss.at("pr_bias_reduced").has_value());

  const std::string dir = testutil::scratch_dir("harness_undefined").string();
  write_table(dir, table);
  const auto text = testutil::slurp(dir + "/probabilities.json");
  EXPECT_NE(text.find("\"pr_bias_reduced_given_phix_lt_phiw\": null"), std::string::npos);
}

TEST(Harness, AggregationIgnoresRowOrder) {
  const auto t = toy();
  const auto ref = aggregate(t.cells, t.raw, 2.0, 2);
  std::mt19937 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto raw = t.raw;
    std::shuffle(raw.begin(), raw.end(), gen);
    const auto table = aggregate(t.cells, raw, 2.0, 2);
    ASSERT_EQ(table.metrics.size(), ref.metrics.size());
    for (std::size_t i = 0; i < ref.metrics.size(); ++i) {
      EXPECT_EQ(table.metrics[i].mae, ref.metrics[i].mae);
      EXPECT_EQ(table.metrics[i].rmse, ref.metrics[i].rmse);
    }
    EXPECT_EQ(table.probabilities, ref.probabilities);
    EXPECT_EQ(table.median_edf, ref.median_edf);
  }
}

TEST(Harness, NoOlsRowsIsAnError) {
  auto t = toy();
  std::erase_if(t.raw, [](const RawEstimate& e) { return e.method == MethodId::OLS; });
  EXPECT_THROW(probability_summaries(t.cells, t.raw, 2.0), UsageError);
}

TEST(Harness, OlsAgainstItselfIsNeutral) {
  auto c = tiny_study();
  c.methods = {MethodId::OLS};
  const auto r = run_study(c);
  for (const auto& m : r.table.metrics) {
    EXPECT_EQ(m.q1, 1.0);
    EXPECT_EQ(m.q2, 1.0);
  }
  EXPECT_EQ(*r.table.probabilities.at(MethodId::OLS).at("pr_bias_reduced"), 0.0);
  EXPECT_EQ(r.raw.size(), 2u * 4u);
}

TEST(Harness, RawOutputDoesNotDependOnThreadCount) {
  auto c = tiny_study();
  const std::string first = testutil::scratch_dir("harness_t1").string();
  c.output_dir = first;
  const auto one = run_study(c);
  c.threads = 3;
  c.output_dir = testutil::scratch_dir("harness_t3").string();
  const auto three = run_study(c);
  EXPECT_EQ(testutil::slurp(first + "/raw_estimates.csv"),
            testutil::slurp(c.output_dir + "/raw_estimates.csv"));
  EXPECT_EQ(one.table.probabilities, three.table.probabilities);
  for (const auto& e : one.raw) {
    EXPECT_TRUE(e.ok) << e.failure;
    if (e.method == MethodId::SS_mom) {
      EXPECT_TRUE(e.edf.has_value());
    }
  }
}

TEST(Harness, PersistedFilesReproduceTheTable) {
  auto c = tiny_study();
  c.output_dir = testutil::scratch_dir("harness_roundtrip").string();
  const auto r = run_study(c);
  namespace fs = std::filesystem;
  for (const char* f : {"study_config.json", "raw_estimates.csv", "failures.csv", "cells.csv",
                        "ratios.csv", "cell_metrics.csv", "probabilities.json", "edf.csv"}) {
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / f)) << f;
  }
  const auto raw = read_raw_csv(c.output_dir + "/raw_estimates.csv");
  const auto cells = read_cells_csv(c.output_dir + "/cells.csv");
  ASSERT_EQ(raw.size(), r.raw.size());
  ASSERT_EQ(cells.size(), r.cells.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_EQ(raw[i].estimate, r.raw[i].estimate);
    EXPECT_EQ(raw[i].seed, r.raw[i].seed);
  }
  const auto table = aggregate(cells, raw, c.beta_x, c.replicates);
  EXPECT_EQ(table.probabilities, r.table.probabilities);
  EXPECT_EQ(table.median_edf, r.table.median_edf);
  EXPECT_EQ(testutil::slurp(c.output_dir + "/ratios.csv").substr(0, 15), "cell,method,Q1,");
}

TEST(Harness, CalibrationHitsTheTargetBias) {
  auto c = tiny_study();
  c.methods = {MethodId::OLS};
  const auto r = run_study(c);
  for (const auto& cell : r.cells) {
    EXPECT_NEAR(cell.delta_ols, c.target_relative_bias * c.beta_x, 1e-9);
    EXPECT_GT(cell.sigma_w, 0.0);
  }
}

TEST(Harness, ConfigRoundTrip) {
  auto c = StudyConfig::desk();
  c.seed = 99;
  c.resample_exposure = true;
  c.sqrt_method = SqrtMethod::Cholesky;
  c.ss_nullspace = NullSpaceType::Type3;
  c.ss_prior.nu = 0.5;
  c.spline.ks_grid = {10, 20};
  const auto path = (testutil::scratch_dir("harness_cfg") / "c.json").string();
  write_study_config(path, c);
  const auto back = read_study_config(path);
  EXPECT_EQ(back.preset, "desk");
  EXPECT_EQ(back.phi_x_grid, c.phi_x_grid);
  EXPECT_EQ(back.methods, c.methods);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_TRUE(back.resample_exposure);
  EXPECT_EQ(back.sqrt_method, SqrtMethod::Cholesky);
  EXPECT_EQ(back.ss_nullspace, NullSpaceType::Type3);
  EXPECT_EQ(back.ss_prior.nu, 0.5);
  EXPECT_EQ(back.spline.ks_grid, c.spline.ks_grid);
  EXPECT_EQ(back.chain.iterations, c.chain.iterations);
}

TEST(Harness, Presets) {
  const auto p = StudyConfig::paper();
  EXPECT_EQ(p.phi_x_grid.size(), 10u);
  EXPECT_EQ(p.n_sites, 500u);
  EXPECT_EQ(p.replicates, 100u);
  const auto d = StudyConfig::from_preset("desk");
  EXPECT_EQ(d.phi_w_grid, (std::vector<double>{0.05, 0.2, 0.5}));
  EXPECT_THROW(StudyConfig::from_preset("huge"), UsageError);
}

TEST(Harness, ValidationRejectsBadStudies) {
  auto c = tiny_study();
  c.methods = {MethodId::SS_mom};
  EXPECT_THROW(c.validate(), UsageError);
  c.methods = {MethodId::OLS, MethodId::OLS};
  EXPECT_THROW(c.validate(), UsageError);
  c = tiny_study();
  c.n_sites = 300;
  EXPECT_THROW(c.validate(), UsageError);
  c = tiny_study();
  c.chain.burn_in = c.chain.iterations;
  EXPECT_THROW(c.validate(), UsageError);
  c = tiny_study();
  c.phi_w_grid = {};
  EXPECT_THROW(c.validate(), UsageError);
  c = tiny_study();
  c.threads = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = tiny_study();
  EXPECT_NO_THROW(c.validate());
}

TEST(Harness, MalformedRawFileIsReported) {
  const auto path = (testutil::scratch_dir("harness_bad") / "raw.csv").string();
  {
    std::ofstream out(path);
    out << "cell,method,replicate,estimate,lo,hi,edf,seed\n0,OLS,0,2.1,1,3,NA,5\n0,OLS,1,abc,1,3,NA,5\n";
  }
  try {
    read_raw_csv(path);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_EQ(e.row(), 3);
  }
}

TEST(Harness, UncalibratableCellIsRecordedAsFailures) {
  auto c = tiny_study();
  c.methods = {MethodId::OLS};
  c.target_relative_bias = -0.15;  // opposite sign to the exposure-driven bias
  const auto r = run_study(c);
  std::size_t failed_cells = 0;
  for (const auto& cell : r.cells) {
    const bool failed = std::isnan(cell.sigma_w);
    failed_cells += failed;
    for (const auto& e : r.raw) {
      if (e.cell != cell.index) continue;
      EXPECT_EQ(e.ok, !failed);
      if (failed) {
        EXPECT_FALSE(e.failure.empty());
      }
    }
    EXPECT_EQ(metric(r.table, cell.index, MethodId::OLS).flagged, failed);
  }
  EXPECT_GT(failed_cells, 0u);
}
