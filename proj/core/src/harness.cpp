#include "spatconf/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "spatconf/bias.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/principal_basis.hpp"
#include "spatconf/rng.hpp"

namespace spatconf {

StudyConfig StudyConfig::paper() {
  StudyConfig c;
  c.preset = "paper";
  for (int i = 1; i <= 10; ++i) {
    c.phi_x_grid.push_back(0.05 * i);
    c.phi_w_grid.push_back(0.05 * i);
  }
  c.n_sites = 500;
  c.replicates = 100;
  c.methods = {MethodId::OLS, MethodId::SRE, MethodId::SpatialTP, MethodId::SpatialPlusFx,
               MethodId::SpatialPlus, MethodId::GSEM, MethodId::KS, MethodId::SS_mom};
  c.chain.iterations = 5000;
  c.chain.burn_in = 1000;
  return c;
}

StudyConfig StudyConfig::desk() {
  StudyConfig c;
  c.preset = "desk";
  c.phi_x_grid = {0.05, 0.2, 0.5};
  c.phi_w_grid = {0.05, 0.2, 0.5};
  c.n_sites = 200;
  c.replicates = 30;
  c.methods = {MethodId::OLS, MethodId::SS_mom};
  c.chain.iterations = 2000;
  c.chain.burn_in = 500;
  return c;
}

StudyConfig StudyConfig::from_preset(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw UsageError(fmt::format("unknown preset '{}' (expected desk or paper)", name));
}

void StudyConfig::validate() const {
  if (phi_x_grid.empty() || phi_w_grid.empty()) throw UsageError("range grid is empty");
  for (double v : phi_x_grid) if (!(v > 0.0)) throw UsageError("ranges must be positive");
  for (double v : phi_w_grid) if (!(v > 0.0)) throw UsageError("ranges must be positive");
  if (replicates < 1) throw UsageError("at least one replicate is required");
  if (n_sites < 8) throw UsageError("at least eight sites are required");
  if (n_sites > lattice * lattice) throw UsageError("more sites than lattice nodes");
  if (methods.empty()) throw UsageError("no methods selected");
  if (std::find(methods.begin(), methods.end(), MethodId::OLS) == methods.end()) {
    throw UsageError("OLS must be among the methods; every ratio is relative to it");
  }
  if (std::set<MethodId>(methods.begin(), methods.end()).size() != methods.size()) {
    throw UsageError("duplicate method in the method list");
  }
  if (threads < 1) throw UsageError("thread count must be at least 1");
  if (!(std::abs(delta) < 1.0) || delta == 0.0) throw UsageError("delta must be nonzero and in (-1, 1)");
  if (!(sigma2_x > 0.0) || !(sigma2_eps >= 0.0)) throw UsageError("invalid variances");
  if (chain.burn_in >= chain.iterations) throw UsageError("burn-in must be shorter than the chain");
  ss_prior.validate();
}

double round_significant(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  return std::stod(fmt::format("{:.9g}", v));
}

namespace {

struct CellContext {
  ConfoundingScenario scenario;
  FieldFactors factors;
  Vector x;
  ConditionalLaw law;
  std::optional<PrincipalBasis> basis;  // only when the null space involves x
  std::string error;
};

struct StudyContext {
  SiteSet sites;
  std::optional<PrincipalBasis> basis;
  std::optional<TprsBasis> tprs;
};

bool uses_tprs(MethodId m) {
  return m == MethodId::SpatialTP || m == MethodId::SpatialPlusFx || m == MethodId::SpatialPlus ||
         m == MethodId::GSEM || m == MethodId::KS;
}

bool is_spike_slab(MethodId m) {
  return m == MethodId::SS_fv || m == MethodId::SS_nmig || m == MethodId::SS_mom;
}

FitResult fit_method(MethodId method, const Vector& y, const Vector& x, const Matrix* basis,
                     const StudyContext& study, const StudyConfig& cfg, std::uint64_t seed) {
  if (method == MethodId::OLS) return fit_ols(y, x);
  if (method == MethodId::SRE) {
    SreConfig sc = cfg.sre;
    sc.seed = seed;
    return fit_sre(y, x, study.sites, sc);
  }
  if (uses_tprs(method)) return fit_spline_family(method, y, x, *study.tprs, cfg.spline);
  SsPriorConfig prior = cfg.ss_prior;
  prior.family = method == MethodId::SS_fv     ? PriorFamily::FV
                 : method == MethodId::SS_nmig ? PriorFamily::NMIG
                                               : PriorFamily::MOM;
  ChainConfig cc = cfg.chain;
  cc.seed = seed;
  const auto chain = fit_spike_slab(y, x, *basis, prior, cc);
  const auto s = summarize(chain);
  FitResult r;
  r.method = method;
  r.beta_x_hat = s.beta_x_mean;
  r.lo = s.lo;
  r.hi = s.hi;
  r.edf = static_cast<double>(s.edf);
  return r;
}

// Exposure, calibrated confounder law and x-dependent basis for one replicate
// when the exposure is resampled per replicate.
CellContext prepare_exposure(const ConfoundingScenario& base, const FieldFactors& factors,
                             const SiteSet& sites, const StudyConfig& cfg, std::uint64_t x_seed,
                             bool needs_basis) {
  CellContext c;
  c.scenario = base;
  c.factors = factors;
  c.x = sample_exposure(base, factors, x_seed);
  const double sw = calibrate_sigma_w(base, factors, c.x, cfg.target_relative_bias);
  c.scenario.sigma2_w = sw * sw;
  c.law = conditional_law(c.scenario, factors, c.x);
  if (needs_basis) c.basis = principal_kriging_basis(sites, cfg.ss_nullspace, c.x);
  return c;
}

}  // namespace

StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    write_study_config((fs::path(cfg.output_dir) / "study_config.json").string(), cfg);
  }

  StudyContext study;
  study.sites = sample_grid_sites(cfg.n_sites, cfg.lattice, derive_seed(cfg.seed, {0}));
  const bool any_ss = std::any_of(cfg.methods.begin(), cfg.methods.end(), is_spike_slab);
  const bool basis_per_exposure = any_ss && nullspace_uses_exposure(cfg.ss_nullspace);
  if (any_ss && !basis_per_exposure) {
    study.basis = principal_kriging_basis(study.sites, cfg.ss_nullspace);
  }
  if (std::any_of(cfg.methods.begin(), cfg.methods.end(), uses_tprs)) {
    study.tprs = tprs_basis(study.sites, required_tprs_rank(cfg.n_sites, cfg.spline));
  }

  // Cells in row-major (phi_x outer, phi_w inner) order.
  std::vector<StudyCell> cells;
  std::vector<CellContext> contexts;
  for (double px : cfg.phi_x_grid) {
    for (double pw : cfg.phi_w_grid) {
      StudyCell cell;
      cell.index = cells.size();
      cell.phi_x = px;
      cell.phi_w = pw;
      ConfoundingScenario sc;
      sc.phi_x = px;
      sc.phi_w = pw;
      sc.delta = cfg.delta;
      sc.sigma2_x = cfg.sigma2_x;
      sc.sigma2_eps = cfg.sigma2_eps;
      sc.beta0 = cfg.beta0;
      sc.beta_x = cfg.beta_x;
      const auto factors = field_factors(sc, study.sites, cfg.sqrt_method);
      CellContext ctx;
      // A cell whose exposure cannot be calibrated is kept; its replicates are recorded as failures.
      try {
        ctx = prepare_exposure(sc, factors, study.sites, cfg, derive_seed(cfg.seed, {1, cell.index}),
                               basis_per_exposure);
        cell.sigma_w = ctx.scenario.sigma_w();
        cell.delta_ols = delta_ols(ctx.scenario, ctx.factors, ctx.x)(1);
      } catch (const CalibrationError& e) {
        ctx.scenario = sc;
        ctx.factors = factors;
        ctx.error = e.what();
        cell.sigma_w = cell.delta_ols = NAN;
      }
      cells.push_back(cell);
      contexts.push_back(std::move(ctx));
    }
  }

  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_tasks = cells.size() * cfg.replicates;
  std::vector<RawEstimate> raw(n_tasks * n_methods);
  std::atomic<std::size_t> next{0};

  // One task = one (cell, replicate); the methods share the replicate data.
  auto worker = [&]() {
    for (std::size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) {
      const std::size_t c = t / cfg.replicates;
      const std::size_t r = t % cfg.replicates;
      const std::uint64_t rep_seed = derive_seed(cfg.seed, {2, c, r});
      std::optional<CellContext> own;
      const CellContext* ctx = &contexts[c];
      std::string setup_error;
      FieldReplicate rep;
      try {
        if (!ctx->error.empty() && !cfg.resample_exposure) throw CalibrationError(ctx->error);
        if (cfg.resample_exposure) {
          own = prepare_exposure(ctx->scenario, ctx->factors, study.sites, cfg,
                                 derive_seed(cfg.seed, {4, c, r}), basis_per_exposure);
          ctx = &*own;
        }
        rep = sample_replicate(ctx->scenario, ctx->law, ctx->x, rep_seed);
      } catch (const std::exception& e) {
        setup_error = e.what();
      }
      const Matrix* basis = nullptr;
      if (ctx->basis) basis = &ctx->basis->B;
      else if (study.basis) basis = &study.basis->B;
      for (std::size_t m = 0; m < n_methods; ++m) {
        RawEstimate& out = raw[t * n_methods + m];
        out.cell = c;
        out.replicate = r;
        out.method = cfg.methods[m];
        out.seed = derive_seed(cfg.seed, {3, c, r, static_cast<std::uint64_t>(cfg.methods[m])});
        if (!setup_error.empty()) {
          out.failure = setup_error;
          continue;
        }
        try {
          const auto fit = fit_method(cfg.methods[m], rep.y, ctx->x, basis, study, cfg, out.seed);
          if (!std::isfinite(fit.beta_x_hat)) throw NumericalError("non-finite estimate");
          out.ok = true;
          out.estimate = round_significant(fit.beta_x_hat);
          out.lo = round_significant(fit.lo);
          out.hi = round_significant(fit.hi);
          if (fit.edf) out.edf = round_significant(*fit.edf);
        } catch (const std::exception& e) {
          out.failure = e.what();
        }
      }
    }
  };
  const std::size_t nthreads = std::min(cfg.threads, std::max<std::size_t>(n_tasks, 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  StudyResult result;
  result.cells = cells;
  result.raw = std::move(raw);
  if (!cfg.output_dir.empty()) {
    const fs::path dir(cfg.output_dir);
    write_raw_csv((dir / "raw_estimates.csv").string(), result.raw);
    write_failures_csv((dir / "failures.csv").string(), result.raw);
    write_cells_csv((dir / "cells.csv").string(), result.cells);
  }
  result.table = aggregate(result.cells, result.raw, cfg.beta_x, cfg.replicates);
  if (!cfg.output_dir.empty()) write_table(cfg.output_dir, result.table);
  return result;
}

BenchmarkTable aggregate(const std::vector<StudyCell>& cells, const std::vector<RawEstimate>& raw,
                         double beta_x, std::size_t replicates) {
  BenchmarkTable table;
  table.cells = cells;
  std::vector<MethodId> methods;
  for (const auto& e : raw) {
    if (std::find(methods.begin(), methods.end(), e.method) == methods.end()) methods.push_back(e.method);
  }
  std::sort(methods.begin(), methods.end());

  // Sums are accumulated in (cell, method, replicate) order so the result
  // does not depend on the order of `raw`.
  std::map<std::tuple<std::size_t, MethodId, std::size_t>, double> err;
  for (const auto& e : raw) {
    if (e.ok) err[{e.cell, e.method, e.replicate}] = e.estimate - beta_x;
  }
  std::map<std::pair<std::size_t, MethodId>, std::pair<double, double>> mae_rmse;
  std::map<std::pair<std::size_t, MethodId>, std::size_t> counts;
  for (const auto& [key, v] : err) {
    auto& acc = mae_rmse[{std::get<0>(key), std::get<1>(key)}];
    acc.first += std::abs(v);
    acc.second += v * v;
    ++counts[{std::get<0>(key), std::get<1>(key)}];
  }
  for (const auto& cell : cells) {
    const auto ols_key = std::make_pair(cell.index, MethodId::OLS);
    const std::size_t ols_n = counts.count(ols_key) ? counts[ols_key] : 0;
    const double ols_mae = ols_n ? mae_rmse[ols_key].first / static_cast<double>(ols_n) : NAN;
    const double ols_rmse = ols_n ? std::sqrt(mae_rmse[ols_key].second / static_cast<double>(ols_n)) : NAN;
    for (MethodId m : methods) {
      CellMetrics cm;
      cm.cell = cell.index;
      cm.method = m;
      const auto key = std::make_pair(cell.index, m);
      cm.successes = counts.count(key) ? counts[key] : 0;
      if (cm.successes > 0) {
        cm.mae = mae_rmse[key].first / static_cast<double>(cm.successes);
        cm.rmse = std::sqrt(mae_rmse[key].second / static_cast<double>(cm.successes));
      } else {
        cm.mae = cm.rmse = NAN;
      }
      if (m == MethodId::OLS) {
        cm.q1 = cm.q2 = cm.successes > 0 ? 1.0 : NAN;
      } else {
        cm.q1 = cm.mae / ols_mae;
        cm.q2 = cm.rmse / ols_rmse;
      }
      cm.flagged = static_cast<double>(cm.successes) < 0.9 * static_cast<double>(replicates);
      table.metrics.push_back(cm);
    }
  }
  table.probabilities = probability_summaries(cells, raw, beta_x);
  // Cell-level probabilities over non-flagged cells.
  for (MethodId m : methods) {
    auto& probs = table.probabilities[m];
    auto frac = [&](auto cell_pred, auto metric_pred) -> std::optional<double> {
      std::size_t num = 0, den = 0;
      for (const auto& cm : table.metrics) {
        if (cm.method != m || cm.flagged || !std::isfinite(cm.q2)) continue;
        if (!cell_pred(cells[cm.cell])) continue;
        ++den;
        num += metric_pred(cm);
      }
      if (den == 0) return std::nullopt;
      return static_cast<double>(num) / static_cast<double>(den);
    };
    auto all = [](const StudyCell&) { return true; };
    auto below = [](const StudyCell& c) { return c.phi_x < c.phi_w; };
    auto mid = [](const StudyCell& c) { return 0.2 < c.phi_x && c.phi_x < c.phi_w; };
    probs["pr_q1_lt_1"] = frac(all, [](const CellMetrics& c) { return c.q1 < 1.0; });
    probs["pr_q2_lt_1"] = frac(all, [](const CellMetrics& c) { return c.q2 < 1.0; });
    probs["pr_q2_lt_0.8_given_phix_lt_phiw"] = frac(below, [](const CellMetrics& c) { return c.q2 < 0.8; });
    probs["pr_q2_lt_0.8_given_0.2_lt_phix_lt_phiw"] = frac(mid, [](const CellMetrics& c) { return c.q2 < 0.8; });
    probs["pr_q2_gt_1.8"] = frac(all, [](const CellMetrics& c) { return c.q2 > 1.8; });
  }
  table.median_edf = edf_summary(raw);
  return table;
}

std::map<MethodId, ProbabilityMap> probability_summaries(const std::vector<StudyCell>& cells,
                                                         const std::vector<RawEstimate>& raw,
                                                         double beta_x) {
  std::map<std::pair<std::size_t, std::size_t>, double> ols;
  std::set<MethodId> methods;
  for (const auto& e : raw) {
    methods.insert(e.method);
    if (e.method == MethodId::OLS && e.ok) ols[{e.cell, e.replicate}] = e.estimate;
  }
  if (methods.count(MethodId::OLS) == 0) throw UsageError("raw estimates contain no OLS rows");
  std::map<std::size_t, const StudyCell*> by_index;
  for (const auto& c : cells) by_index[c.index] = &c;

  // Indicator counts in three condition sets: all, phi_x < phi_w, 0.2 < phi_x < phi_w.
  std::map<MethodId, std::array<std::pair<std::size_t, std::size_t>, 3>> counts;
  for (MethodId m : methods) counts[m] = {};
  for (const auto& e : raw) {
    if (!e.ok) continue;
    const auto it = ols.find({e.cell, e.replicate});
    const auto cit = by_index.find(e.cell);
    if (it == ols.end() || cit == by_index.end()) continue;
    const bool better = std::abs(e.estimate - beta_x) < std::abs(it->second - beta_x);
    const StudyCell& c = *cit->second;
    const bool cond[3] = {true, c.phi_x < c.phi_w, 0.2 < c.phi_x && c.phi_x < c.phi_w};
    for (int k = 0; k < 3; ++k) {
      if (!cond[k]) continue;
      counts[e.method][static_cast<std::size_t>(k)].second += 1;
      counts[e.method][static_cast<std::size_t>(k)].first += better;
    }
  }
  const char* names[3] = {"pr_bias_reduced", "pr_bias_reduced_given_phix_lt_phiw",
                          "pr_bias_reduced_given_0.2_lt_phix_lt_phiw"};
  std::map<MethodId, ProbabilityMap> out;
  for (const auto& [m, arr] : counts) {
    for (int k = 0; k < 3; ++k) {
      const auto [num, den] = arr[static_cast<std::size_t>(k)];
      out[m][names[k]] = den ? std::optional<double>(static_cast<double>(num) / static_cast<double>(den))
                             : std::nullopt;
    }
    out[m]["n_pairs"] = static_cast<double>(arr[0].second);
  }
  return out;
}

std::map<std::pair<std::size_t, MethodId>, double> edf_summary(const std::vector<RawEstimate>& raw) {
  std::map<std::pair<std::size_t, MethodId>, std::vector<double>> values;
  for (const auto& e : raw) {
    if (e.ok && e.edf) values[{e.cell, e.method}].push_back(*e.edf);
  }
  std::map<std::pair<std::size_t, MethodId>, double> out;
  for (auto& [key, v] : values) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    out[key] = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  }
  return out;
}

}  // namespace spatconf
