#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "spatconf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return spatconf::cli_entry(static_cast<int>(argv.size()), argv.data());
}

std::size_t line_count(const fs::path& p) {
  const auto text = testutil::slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(Cli, UsageErrorsAreNonzero) {
  EXPECT_NE(run({}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
  EXPECT_NE(run({"simulate", "--phix", "0.1"}), 0);
  EXPECT_NE(run({"bias", "--phix", "0.1", "--phiw", "abc"}), 0);
  const auto dir = testutil::scratch_dir("cli_usage").string();
  EXPECT_EQ(run({"simulate", "--phix", "0.1", "--phiw", "0.2", "--delta", "1.5", "--out", dir}), 2);
  EXPECT_EQ(run({"benchmark", "--preset", "galactic", "--out", dir}), 2);
}

TEST(Cli, SimulateThenFitThenBasis) {
  const auto dir = testutil::scratch_dir("cli_sim");
  ASSERT_EQ(run({"simulate", "--phix", "0.1", "--phiw", "0.3", "--n", "40", "--grid", "16",
                 "--replicates", "2", "--seed", "3", "--out", dir.string()}),
            0);
  const auto archive = dir / "replicates.csv";
  ASSERT_TRUE(fs::exists(archive));

  const auto fit_dir = dir / "fit";
  ASSERT_EQ(run({"fit", "--data", archive.string(), "--replicate", "1", "--family", "mom",
                 "--iterations", "300", "--burn-in", "100", "--out", fit_dir.string()}),
            0);
  const auto summary = nlohmann::json::parse(testutil::slurp(fit_dir / "summary.json"));
  EXPECT_TRUE(summary.contains("beta_x_mean"));
  EXPECT_EQ(line_count(fit_dir / "draws.csv"), 201u);
  EXPECT_EQ(run({"fit", "--data", archive.string(), "--replicate", "5", "--out", fit_dir.string()}), 2);

  const auto basis_dir = dir / "basis";
  ASSERT_EQ(run({"basis", "--archive", archive.string(), "--nullspace", "2", "--k", "5", "--out",
                 basis_dir.string()}),
            0);
  EXPECT_EQ(line_count(basis_dir / "basis.csv"), 41u);
  EXPECT_EQ(testutil::slurp(basis_dir / "basis.csv").substr(0, 25), "site,easting,northing,b1,");
  EXPECT_TRUE(fs::exists(basis_dir / "eigenvalues.csv"));
  const auto tprs_dir = dir / "tprs";
  ASSERT_EQ(run({"basis", "--n", "30", "--grid", "16", "--kind", "tprs", "--k", "10", "--out",
                 tprs_dir.string()}),
            0);
  EXPECT_EQ(line_count(tprs_dir / "penalty.csv"), 8u);
}

TEST(Cli, BiasTable) {
  const auto dir = testutil::scratch_dir("cli_bias");
  ASSERT_EQ(run({"bias", "--phix", "0.05", "--phiw", "0.5", "0.2", "--n", "60", "--grid", "16",
                 "--max-k", "5", "--out", dir.string()}),
            0);
  const auto text = testutil::slurp(dir / "bias.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "phi_x,phi_w,nullspace,k,d_x,delta_ols");
  EXPECT_EQ(line_count(dir / "bias.csv"), 1u + 2u * 5u);
}

TEST(Cli, BenchmarkAndApp) {
  const auto dir = testutil::scratch_dir("cli_bench");
  ASSERT_EQ(run({"benchmark", "--preset", "desk", "--replicates", "1", "--methods", "OLS", "--out",
                 dir.string()}),
            0);
  for (const char* f : {"raw_estimates.csv", "cells.csv", "probabilities.json", "ratios.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(line_count(dir / "raw_estimates.csv"), 10u);

  const auto data = dir / "obs.csv";
  {
    std::ofstream out(data);
    out << "lon,lat,o3,nox,u10,v10,temp,ssr,voc,rh\n";
    for (int i = 0; i < 20; ++i) {
      out << (i % 5) << ',' << (i / 5) << ',' << 30 + (i * 7) % 11 << ',' << 5 + (i * 3) % 7 << ','
          << (i % 3) << ',' << (i % 4) << ',' << 280 + i % 6 << ',' << 100 + i << ',' << 2 + i % 2
          << ',' << 50 + (i * 13) % 17 << '\n';
    }
  }
  const auto app_dir = dir / "app";
  ASSERT_EQ(run({"app", "--data", data.string(), "--methods", "OLS,KS", "--out", app_dir.string()}), 0);
  EXPECT_EQ(line_count(app_dir / "app_report.csv"), 4u);

  const auto bad = dir / "bad.csv";
  std::ofstream(bad) << "lon,lat,o3\n1,2,3\n";
  EXPECT_EQ(run({"app", "--data", bad.string(), "--out", app_dir.string()}), 2);
}
