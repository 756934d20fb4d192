#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "spatconf/application.hpp"
#include "spatconf/archive.hpp"
#include "spatconf/bias.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/harness.hpp"
#include "spatconf/principal_basis.hpp"
#include "spatconf/rng.hpp"
#include "spatconf/simulator.hpp"
#include "spatconf/ss_regression.hpp"

namespace spatconf {
namespace {

namespace fs = std::filesystem;

NullSpaceType nullspace_from_int(int v) {
  switch (v) {
    case 1: return NullSpaceType::Type1;
    case 2: return NullSpaceType::Type2;
    case 3: return NullSpaceType::Type3;
  }
  throw UsageError(fmt::format("--nullspace must be 1, 2 or 3 (got {})", v));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::vector<MethodId> parse_methods(const std::string& list) {
  std::vector<MethodId> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(method_from_string(item));
  }
  if (out.empty()) throw UsageError("--methods is empty");
  return out;
}

ReplicateArchive load_archive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot read {}", path));
  return read_replicate_archive(in);
}

struct SimulateArgs {
  ConfoundingScenario scenario;
  std::size_t n = 200;
  std::size_t grid = 64;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  double target_bias = 0.0;
  std::string out;
};

void run_simulate(const SimulateArgs& a) {
  ConfoundingScenario scenario = a.scenario;
  scenario.validate();
  const SiteSet sites = sample_grid_sites(a.n, a.grid, derive_seed(a.seed, {0}));
  const FieldFactors factors = field_factors(scenario, sites);
  const Vector x = sample_exposure(scenario, factors, derive_seed(a.seed, {1, 0}));
  if (a.target_bias > 0.0) scenario.sigma2_w = std::pow(calibrate_sigma_w(scenario, factors, x, a.target_bias), 2);
  const ConditionalLaw law = conditional_law(scenario, factors, x);
  ReplicateArchive archive{scenario, a.seed, sites, {}};
  for (std::size_t r = 0; r < a.replicates; ++r) {
    archive.replicates.push_back(sample_replicate(scenario, law, x, derive_seed(a.seed, {2, 0, r})));
  }
  fs::create_directories(a.out);
  auto out = open_out(fs::path(a.out) / "replicates.csv");
  write_replicate_archive(out, archive);
}

struct BasisArgs {
  std::string archive;
  std::size_t n = 200;
  std::size_t grid = 64;
  std::uint64_t seed = 1;
  double phi_x = 0.2;
  int nullspace = 1;
  std::string kind = "pkf";
  std::size_t k = 0;
  std::string out;
};

void run_basis(const BasisArgs& a) {
  SiteSet sites;
  Vector x;
  if (!a.archive.empty()) {
    const auto archive = load_archive(a.archive);
    sites = archive.sites;
    if (!archive.replicates.empty()) x = archive.replicates.front().x;
  } else {
    sites = sample_grid_sites(a.n, a.grid, derive_seed(a.seed, {0}));
    ConfoundingScenario s;
    s.phi_x = a.phi_x;
    x = sample_exposure(s, sites, derive_seed(a.seed, {1, 0}));
  }
  Matrix basis;
  Vector values;
  if (a.kind == "pkf") {
    const auto pkf = principal_kriging_basis(sites, nullspace_from_int(a.nullspace), x);
    basis = pkf.B;
    values = pkf.eigenvalues;
  } else if (a.kind == "tprs") {
    const std::size_t k = a.k == 0 ? std::min<std::size_t>(sites.size(), 150) : a.k;
    const auto t = tprs_basis(sites, k);
    basis.resize(t.null_space.rows(), t.null_space.cols() - 1 + t.smooth.cols());
    basis << t.null_space.rightCols(2), t.smooth;
    values = t.penalty;
  } else {
    throw UsageError(fmt::format("--kind must be pkf or tprs (got {})", a.kind));
  }
  if (a.k > 0 && a.kind == "pkf") basis.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(basis.cols(), a.k));

  fs::create_directories(a.out);
  auto out = open_out(fs::path(a.out) / "basis.csv");
  out << "site,easting,northing";
  for (Eigen::Index j = 0; j < basis.cols(); ++j) out << ",b" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    const auto& s = sites[static_cast<std::size_t>(i)];
    out << i << ',' << format_real(s.easting) << ',' << format_real(s.northing);
    for (Eigen::Index j = 0; j < basis.cols(); ++j) out << ',' << format_real(basis(i, j));
    out << '\n';
  }
  auto ev = open_out(fs::path(a.out) / (a.kind == "pkf" ? "eigenvalues.csv" : "penalty.csv"));
  ev << "index,value\n";
  for (Eigen::Index j = 0; j < values.size(); ++j) ev << j + 1 << ',' << format_real(values(j)) << '\n';
}

struct BiasArgs {
  std::vector<double> phi_x;
  std::vector<double> phi_w;
  std::vector<int> nullspace = {1};
  double delta = 0.5;
  std::size_t n = 500;
  std::size_t grid = 64;
  std::uint64_t seed = 1;
  std::size_t max_k = 0;
  std::string out;
};

void run_bias(const BiasArgs& a) {
  const SiteSet sites = sample_grid_sites(a.n, a.grid, derive_seed(a.seed, {0}));
  std::ostringstream table;
  table << "phi_x,phi_w,nullspace,k,d_x,delta_ols\n";
  std::size_t cell = 0;
  for (double px : a.phi_x) {
    for (double pw : a.phi_w) {
      ConfoundingScenario s;
      s.phi_x = px;
      s.phi_w = pw;
      s.delta = a.delta;
      s.validate();
      const FieldFactors factors = field_factors(s, sites);
      const Vector x = sample_exposure(s, factors, derive_seed(a.seed, {1, cell++}));
      const double dols = delta_ols(s, factors, x)(1);
      for (int t : a.nullspace) {
        const auto pkf = principal_kriging_basis(sites, nullspace_from_int(t), x);
        const auto curve = bias_curve(s, factors, x, pkf, a.max_k);
        for (std::size_t i = 0; i < curve.k.size(); ++i) {
          table << format_real(px) << ',' << format_real(pw) << ',' << t << ',' << curve.k[i] << ','
                << format_real(curve.d_x[i]) << ',' << format_real(dols) << '\n';
        }
      }
    }
  }
  if (a.out.empty()) {
    std::cout << table.str();
  } else {
    fs::create_directories(a.out);
    open_out(fs::path(a.out) / "bias.csv") << table.str();
  }
}

struct FitArgs {
  std::string data;
  std::size_t replicate = 0;
  std::string family = "mom";
  int nullspace = 1;
  std::size_t columns = 0;
  SsPriorConfig prior;
  ChainConfig chain;
  std::string out;
};

void run_fit(FitArgs a) {
  const auto archive = load_archive(a.data);
  if (a.replicate >= archive.replicates.size()) {
    throw UsageError(fmt::format("--replicate {} out of range ({} in archive)", a.replicate,
                                 archive.replicates.size()));
  }
  const auto& rep = archive.replicates[a.replicate];
  a.prior.family = prior_family_from_string(a.family);
  a.prior.validate();
  const auto pkf = principal_kriging_basis(archive.sites, nullspace_from_int(a.nullspace), rep.x);
  Matrix basis = pkf.B;
  if (a.columns > 0) basis.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(basis.cols(), a.columns));
  const auto chain = fit_spike_slab(rep.y, rep.x, basis, a.prior, a.chain);
  const auto s = summarize(chain);

  nlohmann::json j;
  j["family"] = to_string(chain.family);
  j["replicate"] = a.replicate;
  j["bases"] = basis.cols();
  j["retained_draws"] = chain.draws.size();
  j["beta_x_mean"] = s.beta_x_mean;
  j["beta_x_median"] = s.beta_x_median;
  j["lo"] = s.lo;
  j["hi"] = s.hi;
  j["edf"] = s.edf;
  j["inclusion"] = std::vector<double>(s.inclusion.data(), s.inclusion.data() + s.inclusion.size());
  j["diagnostics"] = nlohmann::json::object();
  for (const auto& [key, value] : chain.diagnostics) j["diagnostics"][key] = value;

  fs::create_directories(a.out);
  open_out(fs::path(a.out) / "summary.json") << j.dump(2) << '\n';
  auto out = open_out(fs::path(a.out) / "draws.csv");
  out << "draw,beta_x,sigma2,model_size";
  for (Eigen::Index l = 0; l < basis.cols(); ++l) out << ",xi" << l + 1;
  out << '\n';
  for (std::size_t d = 0; d < chain.draws.size(); ++d) {
    const auto& st = chain.draws[d];
    std::size_t size = 0;
    for (auto g : st.gamma) size += g;
    out << d << ',' << format_real(destandardize_beta_x(chain.record, st.beta(1))) << ','
        << format_real(st.sigma2) << ',' << size;
    for (Eigen::Index l = 0; l < st.xi.size(); ++l) out << ',' << format_real(st.xi(l));
    out << '\n';
  }
}

struct BenchmarkArgs {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t replicates = 0;
  std::string methods;
  std::string out;
};

void run_benchmark(const BenchmarkArgs& a) {
  StudyConfig cfg = StudyConfig::from_preset(a.preset);
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.output_dir = a.out;
  if (a.replicates > 0) cfg.replicates = a.replicates;
  if (!a.methods.empty()) cfg.methods = parse_methods(a.methods);
  cfg.validate();
  const auto result = run_study(cfg);
  for (const auto& m : result.table.metrics) {
    if (m.flagged) {
      std::cerr << fmt::format("warning: cell {} method {} has only {} successful replicates\n", m.cell,
                               to_string(m.method), m.successes);
    }
  }
}

struct AppArgs {
  std::string data;
  std::string methods;
  bool celsius = false;
  std::uint64_t seed = 1;
  std::size_t iterations = 5000;
  std::size_t burn_in = 1000;
  std::string out;
};

void run_app(const AppArgs& a) {
  IngestOptions io;
  io.unit = a.celsius ? TemperatureUnit::Celsius : TemperatureUnit::Kelvin;
  const auto table = ingest(a.data, io);
  AppOptions opts;
  if (!a.methods.empty()) opts.methods = parse_methods(a.methods);
  opts.seed = a.seed;
  opts.chain.iterations = a.iterations;
  opts.chain.burn_in = a.burn_in;
  const auto report = run_application(table, opts);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  fs::create_directories(a.out);
  write_app_report(a.out, report);
}

void add_prior_options(CLI::App* cmd, SsPriorConfig& p) {
  cmd->add_option("--vbeta", p.V_beta, "Prior variance of the fixed effects")->capture_default_str();
  cmd->add_option("--a", p.a, "Inverse-gamma shape for sigma2")->capture_default_str();
  cmd->add_option("--b", p.b, "Inverse-gamma scale for sigma2")->capture_default_str();
  cmd->add_option("--w", p.w, "Prior inclusion probability (FV, NMIG)")->capture_default_str();
  cmd->add_option("--c0", p.c0, "Spike-to-slab variance ratio")->capture_default_str();
  cmd->add_option("--psi2", p.psi2, "Slab variance (FV)")->capture_default_str();
  cmd->add_option("--a-psi", p.a_psi, "Inverse-gamma shape of the slab variance (NMIG)")->capture_default_str();
  cmd->add_option("--b-psi", p.b_psi, "Inverse-gamma scale of the slab variance (NMIG)")->capture_default_str();
  cmd->add_option("--nu", p.nu, "pMOM dispersion")->capture_default_str();
  cmd->add_flag("--beta-w", p.beta_w, "Learn w with a Beta(1,1) prior (FV, NMIG)");
}

}  // namespace

int cli_entry(int argc, const char* const* argv) {
  CLI::App app{"Spatial confounding simulation, bias analysis and regression toolkit", "spatconf"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate exposure, confounder and outcome replicates");
  simulate->add_option("--phix", sim.scenario.phi_x, "Exposure range")->required();
  simulate->add_option("--phiw", sim.scenario.phi_w, "Confounder range")->required();
  simulate->add_option("--delta", sim.scenario.delta, "Cross-correlation")->capture_default_str();
  simulate->add_option("--sigma2-x", sim.scenario.sigma2_x, "Exposure variance")->capture_default_str();
  simulate->add_option("--sigma2-w", sim.scenario.sigma2_w, "Confounder variance")->capture_default_str();
  simulate->add_option("--sigma2-eps", sim.scenario.sigma2_eps, "Noise variance")->capture_default_str();
  simulate->add_option("--beta0", sim.scenario.beta0, "Intercept")->capture_default_str();
  simulate->add_option("--betax", sim.scenario.beta_x, "Exposure effect")->capture_default_str();
  simulate->add_option("--target-bias", sim.target_bias,
                       "Calibrate sigma2-w so Delta_OLS / beta_x equals this value (0 = off)")
      ->capture_default_str();
  simulate->add_option("--n", sim.n, "Number of sites")->capture_default_str();
  simulate->add_option("--grid", sim.grid, "Lattice side")->capture_default_str();
  simulate->add_option("--replicates", sim.replicates, "Replicates")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->required();

  BasisArgs bas;
  auto* basis = app.add_subcommand("basis", "Export a principal kriging or thin-plate spline basis");
  basis->add_option("--archive", bas.archive, "Replicate archive supplying sites and exposure");
  basis->add_option("--n", bas.n, "Number of sites when no archive is given")->capture_default_str();
  basis->add_option("--grid", bas.grid, "Lattice side")->capture_default_str();
  basis->add_option("--seed", bas.seed, "Master seed")->capture_default_str();
  basis->add_option("--phix", bas.phi_x, "Exposure range for types 2 and 3")->capture_default_str();
  basis->add_option("--nullspace", bas.nullspace, "Null space type 1, 2 or 3")->capture_default_str();
  basis->add_option("--kind", bas.kind, "pkf or tprs")->capture_default_str();
  basis->add_option("--k", bas.k, "Columns to export (0 = all for pkf, 150 for tprs)")->capture_default_str();
  basis->add_option("--out", bas.out, "Output directory")->required();

  BiasArgs bia;
  auto* bias = app.add_subcommand("bias", "Tabulate d_x against the number of principal kriging functions");
  bias->add_option("--phix", bia.phi_x, "Exposure range(s)")->required();
  bias->add_option("--phiw", bia.phi_w, "Confounder range(s)")->required();
  bias->add_option("--nullspace", bia.nullspace, "Null space type(s)")->capture_default_str();
  bias->add_option("--delta", bia.delta, "Cross-correlation")->capture_default_str();
  bias->add_option("--n", bia.n, "Number of sites")->capture_default_str();
  bias->add_option("--grid", bia.grid, "Lattice side")->capture_default_str();
  bias->add_option("--seed", bia.seed, "Master seed")->capture_default_str();
  bias->add_option("--max-k", bia.max_k, "Largest k (0 = n - 3)")->capture_default_str();
  bias->add_option("--out", bia.out, "Output directory (stdout when omitted)");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a spike-and-slab spatial regression to one archived replicate");
  fit->add_option("--data", fa.data, "Replicate archive")->required();
  fit->add_option("--replicate", fa.replicate, "Zero-based replicate index")->capture_default_str();
  fit->add_option("--family", fa.family, "fv, nmig or mom")->capture_default_str();
  fit->add_option("--nullspace", fa.nullspace, "Null space type 1, 2 or 3")->capture_default_str();
  fit->add_option("--columns", fa.columns, "Leading basis columns to use (0 = all)")->capture_default_str();
  fit->add_option("--iterations", fa.chain.iterations, "Total iterations")->capture_default_str();
  fit->add_option("--burn-in", fa.chain.burn_in, "Burn-in iterations")->capture_default_str();
  fit->add_option("--thin", fa.chain.thin, "Thinning")->capture_default_str();
  fit->add_option("--model-moves", fa.chain.model_moves, "MOM model proposals per iteration")->capture_default_str();
  fit->add_option("--seed", fa.chain.seed, "Chain seed")->capture_default_str();
  add_prior_options(fit, fa.prior);
  fit->add_option("--out", fa.out, "Output directory")->required();

  BenchmarkArgs ben;
  auto* benchmark = app.add_subcommand("benchmark", "Run the factorial simulation study");
  benchmark->add_option("--preset", ben.preset, "desk or paper")->capture_default_str();
  benchmark->add_option("--seed", ben.seed, "Master seed")->capture_default_str();
  benchmark->add_option("--threads", ben.threads, "Worker threads")->capture_default_str();
  benchmark->add_option("--replicates", ben.replicates, "Override the preset replicate count");
  benchmark->add_option("--methods", ben.methods, "Comma-separated method list overriding the preset");
  benchmark->add_option("--out", ben.out, "Output directory")->required();

  AppArgs ap;
  auto* appcmd = app.add_subcommand("app", "Ozone / NOx comparison across methods");
  appcmd->add_option("--data", ap.data, "Site table (CSV)")->required();
  appcmd->add_option("--methods", ap.methods, "Comma-separated methods (default: all)");
  appcmd->add_flag("--celsius", ap.celsius, "Temperatures in the file are Celsius, not Kelvin");
  appcmd->add_option("--seed", ap.seed, "Master seed")->capture_default_str();
  appcmd->add_option("--iterations", ap.iterations, "Spike-and-slab iterations")->capture_default_str();
  appcmd->add_option("--burn-in", ap.burn_in, "Spike-and-slab burn-in")->capture_default_str();
  appcmd->add_option("--out", ap.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) run_simulate(sim);
    if (*basis) run_basis(bas);
    if (*bias) run_bias(bia);
    if (*fit) run_fit(fa);
    if (*benchmark) run_benchmark(ben);
    if (*appcmd) run_app(ap);
  } catch (const IngestError& e) {
    std::cerr << fmt::format("error: {} (line {}, column '{}')\n", e.what(), e.row(), e.column());
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace spatconf
