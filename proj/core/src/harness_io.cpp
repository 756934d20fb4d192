#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "spatconf/archive.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/harness.hpp"

namespace spatconf {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(fmt::format("cannot write {}", path));
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(fmt::format("cannot read {}", path));
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

json opt_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return round_significant(*v);
}

std::string sqrt_name(SqrtMethod m) { return m == SqrtMethod::Cholesky ? "cholesky" : "eigen"; }

SqrtMethod sqrt_from(const std::string& s) {
  if (s == "cholesky") return SqrtMethod::Cholesky;
  if (s == "eigen") return SqrtMethod::SymmetricEigen;
  throw UsageError(fmt::format("unknown square-root method '{}'", s));
}

int nullspace_number(NullSpaceType t) {
  return t == NullSpaceType::Type1 ? 1 : t == NullSpaceType::Type2 ? 2 : 3;
}

NullSpaceType nullspace_from(int v) {
  switch (v) {
    case 1: return NullSpaceType::Type1;
    case 2: return NullSpaceType::Type2;
    case 3: return NullSpaceType::Type3;
  }
  throw UsageError(fmt::format("null-space type must be 1, 2 or 3, got {}", v));
}

}  // namespace

void write_study_config(const std::string& path, const StudyConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["phi_x_grid"] = c.phi_x_grid;
  j["phi_w_grid"] = c.phi_w_grid;
  j["n_sites"] = c.n_sites;
  j["lattice"] = c.lattice;
  j["replicates"] = c.replicates;
  j["delta"] = c.delta;
  j["sigma2_x"] = c.sigma2_x;
  j["sigma2_eps"] = c.sigma2_eps;
  j["beta0"] = c.beta0;
  j["beta_x"] = c.beta_x;
  j["target_relative_bias"] = c.target_relative_bias;
  std::vector<std::string> methods;
  for (MethodId m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["resample_exposure"] = c.resample_exposure;
  j["sqrt_method"] = sqrt_name(c.sqrt_method);
  j["ss_nullspace"] = nullspace_number(c.ss_nullspace);
  j["ss_prior"] = {{"V_beta", c.ss_prior.V_beta}, {"a", c.ss_prior.a},       {"b", c.ss_prior.b},
                   {"w", c.ss_prior.w},           {"c0", c.ss_prior.c0},     {"psi2", c.ss_prior.psi2},
                   {"a_psi", c.ss_prior.a_psi},   {"b_psi", c.ss_prior.b_psi}, {"nu", c.ss_prior.nu},
                   {"beta_w", c.ss_prior.beta_w}};
  j["chain"] = {{"iterations", c.chain.iterations}, {"burn_in", c.chain.burn_in},
                {"thin", c.chain.thin}, {"model_moves", c.chain.model_moves}};
  j["spline"] = {{"k_max", c.spline.k_max}, {"ks_grid", c.spline.ks_grid},
                 {"gcv_grid_points", c.spline.gcv_grid_points}};
  j["sre"] = {{"iterations", c.sre.iterations}, {"burn_in", c.sre.burn_in},
              {"beta_prior_variance", c.sre.beta_prior_variance},
              {"variance_shape", c.sre.variance_shape}, {"variance_scale", c.sre.variance_scale},
              {"range_lo", c.sre.range_lo}, {"range_hi", c.sre.range_hi}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

StudyConfig read_study_config(const std::string& path) {
  auto in = open_in(path);
  StudyConfig c;
  try {
    const json j = json::parse(in);
    c.preset = j.value("preset", c.preset);
    c.phi_x_grid = j.at("phi_x_grid").get<std::vector<double>>();
    c.phi_w_grid = j.at("phi_w_grid").get<std::vector<double>>();
    c.n_sites = j.value("n_sites", c.n_sites);
    c.lattice = j.value("lattice", c.lattice);
    c.replicates = j.value("replicates", c.replicates);
    c.delta = j.value("delta", c.delta);
    c.sigma2_x = j.value("sigma2_x", c.sigma2_x);
    c.sigma2_eps = j.value("sigma2_eps", c.sigma2_eps);
    c.beta0 = j.value("beta0", c.beta0);
    c.beta_x = j.value("beta_x", c.beta_x);
    c.target_relative_bias = j.value("target_relative_bias", c.target_relative_bias);
    for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.resample_exposure = j.value("resample_exposure", c.resample_exposure);
    c.sqrt_method = sqrt_from(j.value("sqrt_method", std::string("eigen")));
    c.ss_nullspace = nullspace_from(j.value("ss_nullspace", 1));
    if (j.contains("ss_prior")) {
      const auto& p = j["ss_prior"];
      c.ss_prior.V_beta = p.value("V_beta", c.ss_prior.V_beta);
      c.ss_prior.a = p.value("a", c.ss_prior.a);
      c.ss_prior.b = p.value("b", c.ss_prior.b);
      c.ss_prior.w = p.value("w", c.ss_prior.w);
      c.ss_prior.c0 = p.value("c0", c.ss_prior.c0);
      c.ss_prior.psi2 = p.value("psi2", c.ss_prior.psi2);
      c.ss_prior.a_psi = p.value("a_psi", c.ss_prior.a_psi);
      c.ss_prior.b_psi = p.value("b_psi", c.ss_prior.b_psi);
      c.ss_prior.nu = p.value("nu", c.ss_prior.nu);
      c.ss_prior.beta_w = p.value("beta_w", c.ss_prior.beta_w);
    }
    if (j.contains("chain")) {
      const auto& p = j["chain"];
      c.chain.iterations = p.value("iterations", c.chain.iterations);
      c.chain.burn_in = p.value("burn_in", c.chain.burn_in);
      c.chain.thin = p.value("thin", c.chain.thin);
      c.chain.model_moves = p.value("model_moves", c.chain.model_moves);
    }
    if (j.contains("spline")) {
      const auto& p = j["spline"];
      c.spline.k_max = p.value("k_max", c.spline.k_max);
      if (p.contains("ks_grid")) c.spline.ks_grid = p["ks_grid"].get<std::vector<std::size_t>>();
      c.spline.gcv_grid_points = p.value("gcv_grid_points", c.spline.gcv_grid_points);
    }
    if (j.contains("sre")) {
      const auto& p = j["sre"];
      c.sre.iterations = p.value("iterations", c.sre.iterations);
      c.sre.burn_in = p.value("burn_in", c.sre.burn_in);
      c.sre.beta_prior_variance = p.value("beta_prior_variance", c.sre.beta_prior_variance);
      c.sre.variance_shape = p.value("variance_shape", c.sre.variance_shape);
      c.sre.variance_scale = p.value("variance_scale", c.sre.variance_scale);
      c.sre.range_lo = p.value("range_lo", c.sre.range_lo);
      c.sre.range_hi = p.value("range_hi", c.sre.range_hi);
    }
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("bad study config {}: {}", path, e.what()));
  }
  return c;
}

void write_cells_csv(const std::string& path, const std::vector<StudyCell>& cells) {
  auto out = open_out(path);
  out << "cell,phi_x,phi_w,sigma_w,delta_ols\n";
  for (const auto& c : cells) {
    out << c.index << ',' << format_real(c.phi_x) << ',' << format_real(c.phi_w) << ','
        << format_real(c.sigma_w) << ',' << format_real(c.delta_ols) << '\n';
  }
}

std::vector<StudyCell> read_cells_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<StudyCell> cells;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 5) throw IngestError("cells.csv row has wrong arity", row, "");
    StudyCell c;
    c.index = std::stoul(f[0]);
    c.phi_x = std::stod(f[1]);
    c.phi_w = std::stod(f[2]);
    c.sigma_w = std::stod(f[3]);
    c.delta_ols = std::stod(f[4]);
    cells.push_back(c);
  }
  return cells;
}

void write_raw_csv(const std::string& path, const std::vector<RawEstimate>& raw) {
  auto out = open_out(path);
  out << "cell,method,replicate,estimate,lo,hi,edf,seed\n";
  for (const auto& e : raw) {
    out << e.cell << ',' << to_string(e.method) << ',' << e.replicate << ',';
    if (e.ok) {
      out << format_real(e.estimate) << ',' << format_real(e.lo) << ',' << format_real(e.hi) << ','
          << opt_real(e.edf);
    } else {
      out << "NA,NA,NA,NA";
    }
    out << ',' << e.seed << '\n';
  }
}

std::vector<RawEstimate> read_raw_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line != "cell,method,replicate,estimate,lo,hi,edf,seed") {
    throw IngestError("unexpected raw_estimates.csv header", 1, "");
  }
  std::vector<RawEstimate> raw;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 8) throw IngestError("raw_estimates.csv row has wrong arity", row, "");
    RawEstimate e;
    try {
      e.cell = std::stoul(f[0]);
      e.method = method_from_string(f[1]);
      e.replicate = std::stoul(f[2]);
      e.ok = f[3] != "NA";
      if (e.ok) {
        e.estimate = std::stod(f[3]);
        e.lo = std::stod(f[4]);
        e.hi = std::stod(f[5]);
        if (f[6] != "NA") e.edf = std::stod(f[6]);
      } else {
        e.failure = "recorded as missing";
      }
      e.seed = std::stoull(f[7]);
    } catch (const std::logic_error&) {
      throw IngestError("non-numeric field in raw_estimates.csv", row, "");
    }
    raw.push_back(std::move(e));
  }
  return raw;
}

void write_failures_csv(const std::string& path, const std::vector<RawEstimate>& raw) {
  auto out = open_out(path);
  out << "cell,method,replicate,seed,reason\n";
  for (const auto& e : raw) {
    if (e.ok) continue;
    std::string reason = e.failure;
    for (auto& ch : reason) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    out << e.cell << ',' << to_string(e.method) << ',' << e.replicate << ',' << e.seed << ','
        << reason << '\n';
  }
}

void write_table(const std::string& dir, const BenchmarkTable& table) {
  const std::string base = dir.empty() ? std::string(".") : dir;
  {
    auto out = open_out(base + "/ratios.csv");
    out << "cell,method,Q1,Q2\n";
    for (const auto& m : table.metrics) {
      out << m.cell << ',' << to_string(m.method) << ',' << format_real(m.q1) << ','
          << format_real(m.q2) << '\n';
    }
  }
  {
    auto out = open_out(base + "/cell_metrics.csv");
    out << "cell,phi_x,phi_w,method,successes,mae,rmse,Q1,Q2,flagged\n";
    for (const auto& m : table.metrics) {
      const auto& c = table.cells.at(m.cell);
      out << m.cell << ',' << format_real(c.phi_x) << ',' << format_real(c.phi_w) << ','
          << to_string(m.method) << ',' << m.successes << ',' << format_real(m.mae) << ','
          << format_real(m.rmse) << ',' << format_real(m.q1) << ',' << format_real(m.q2) << ','
          << (m.flagged ? 1 : 0) << '\n';
    }
  }
  {
    json j = json::object();
    for (const auto& [m, probs] : table.probabilities) {
      json pj = json::object();
      for (const auto& [name, v] : probs) pj[name] = opt_json(v);
      j[to_string(m)] = pj;
    }
    auto out = open_out(base + "/probabilities.json");
    out << j.dump(2) << '\n';
  }
  {
    auto out = open_out(base + "/edf.csv");
    out << "cell,phi_x,phi_w,method,median_edf\n";
    for (const auto& [key, v] : table.median_edf) {
      const auto& c = table.cells.at(key.first);
      out << key.first << ',' << format_real(c.phi_x) << ',' << format_real(c.phi_w) << ','
          << to_string(key.second) << ',' << format_real(v) << '\n';
    }
  }
}

}  // namespace spatconf
