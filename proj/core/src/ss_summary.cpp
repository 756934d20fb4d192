#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "spatconf/errors.hpp"
#include "spatconf/ss_regression.hpp"

namespace spatconf {

std::string to_string(PriorFamily family) {
  switch (family) {
    case PriorFamily::FV: return "FV";
    case PriorFamily::NMIG: return "NMIG";
    case PriorFamily::MOM: return "MOM";
  }
  return "?";
}

PriorFamily prior_family_from_string(const std::string& name) {
  std::string up;
  for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up.rfind("SS_", 0) == 0) up = up.substr(3);
  if (up == "FV") return PriorFamily::FV;
  if (up == "NMIG") return PriorFamily::NMIG;
  if (up == "MOM") return PriorFamily::MOM;
  throw UsageError(fmt::format("unknown prior family '{}'", name));
}

Vector PosteriorChain::inclusion_probabilities() const {
  if (draws.empty()) throw UsageError("chain has no retained draws");
  const auto p = static_cast<Eigen::Index>(draws.front().gamma.size());
  Vector incl = Vector::Zero(p);
  for (const auto& d : draws) {
    for (Eigen::Index j = 0; j < p; ++j) incl(j) += d.gamma[static_cast<std::size_t>(j)];
  }
  return incl / static_cast<double>(draws.size());
}

PosteriorChain fit_spike_slab(const Vector& y, const Vector& x, const Matrix& basis,
                              const SsPriorConfig& prior, const ChainConfig& cfg) {
  const auto std_data = standardize(y, x, basis);
  const SsData data(std_data.y, std_data.x, std_data.B);
  PosteriorChain chain;
  switch (prior.family) {
    case PriorFamily::FV: chain = gibbs_fv(data, prior, cfg); break;
    case PriorFamily::NMIG: chain = gibbs_nmig(data, prior, cfg); break;
    case PriorFamily::MOM: chain = mom_sampler(data, prior, cfg); break;
  }
  chain.record = std_data.record;
  return chain;
}

namespace {

// Linear interpolation between order statistics (R type 7).
double quantile(const std::vector<double>& sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

ChainSummary summarize(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw UsageError("cannot summarize an empty chain");
  std::vector<double> bx;
  bx.reserve(chain.draws.size());
  for (const auto& d : chain.draws) bx.push_back(destandardize_beta_x(chain.record, d.beta(1)));
  ChainSummary s;
  double sum = 0.0;
  for (double v : bx) sum += v;
  s.beta_x_mean = sum / static_cast<double>(bx.size());
  std::sort(bx.begin(), bx.end());
  s.beta_x_median = quantile(bx, 0.5);
  s.lo = quantile(bx, 0.025);
  s.hi = quantile(bx, 0.975);
  s.inclusion = chain.inclusion_probabilities();
  s.edf = static_cast<std::size_t>((s.inclusion.array() > 0.5).count());
  return s;
}

}  // namespace spatconf
