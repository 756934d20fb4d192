#include "spatconf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "spatconf/bias.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/rng.hpp"

namespace spatconf {

double ConfoundingScenario::sigma_x() const { return std::sqrt(sigma2_x); }
double ConfoundingScenario::sigma_w() const { return std::sqrt(sigma2_w); }

void ConfoundingScenario::validate() const {
  if (!(phi_x > 0.0) || !(phi_w > 0.0)) throw UsageError("ranges must be positive");
  if (!(std::abs(delta) < 1.0)) throw UsageError("delta must lie in (-1, 1)");
  if (!(sigma2_x > 0.0) || !(sigma2_w > 0.0)) throw UsageError("variances must be positive");
  if (!(sigma2_eps >= 0.0)) throw UsageError("noise variance must be nonnegative");
  if (!std::isfinite(beta0) || !std::isfinite(beta_x)) throw UsageError("non-finite coefficient");
}

FieldFactors field_factors(const ConfoundingScenario& scenario, const SiteSet& sites,
                           SqrtMethod method) {
  scenario.validate();
  FieldFactors f;
  f.method = method;
  f.exposure = matrix_sqrt_pair(correlation_matrix(sites, ExpCorrelation(scenario.phi_x)), method);
  if (scenario.phi_w == scenario.phi_x) {
    f.confounder = f.exposure;
  } else {
    f.confounder =
        matrix_sqrt_pair(correlation_matrix(sites, ExpCorrelation(scenario.phi_w)), method);
  }
  return f;
}

SiteSet sample_grid_sites(std::size_t n, std::size_t grid, std::uint64_t seed) {
  if (grid < 2) throw UsageError("grid needs at least two nodes per side");
  const std::size_t nodes = grid * grid;
  if (n > nodes) throw UsageError(fmt::format("cannot draw {} sites from {} nodes", n, nodes));
  std::vector<std::size_t> idx(nodes);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first n entries are a uniform sample without replacement.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, nodes - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Location> locs;
  locs.reserve(n);
  const double step = 1.0 / static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < n; ++i) {
    locs.push_back({static_cast<double>(idx[i] % grid) * step,
                    static_cast<double>(idx[i] / grid) * step});
  }
  return SiteSet(std::move(locs));
}

Vector confounding_direction(const FieldFactors& factors, const Vector& x) {
  return factors.confounder.root * (factors.exposure.inverse_root * x);
}

Vector sample_exposure(const ConfoundingScenario& scenario, const FieldFactors& factors,
                       std::uint64_t seed) {
  Rng rng(seed);
  const Vector z = standard_normal_vector(factors.exposure.root.rows(), rng);
  return scenario.sigma_x() * (factors.exposure.root * z);
}

Vector sample_exposure(const ConfoundingScenario& scenario, const SiteSet& sites,
                       std::uint64_t seed) {
  scenario.validate();
  const auto root =
      matrix_sqrt(correlation_matrix(sites, ExpCorrelation(scenario.phi_x)), SqrtMethod::SymmetricEigen);
  Rng rng(seed);
  const Vector z = standard_normal_vector(root.rows(), rng);
  return scenario.sigma_x() * (root * z);
}

ConditionalLaw conditional_law(const ConfoundingScenario& scenario, const FieldFactors& factors,
                               const Vector& x) {
  if (x.size() != factors.exposure.root.rows()) {
    throw UsageError("exposure length does not match the site count");
  }
  ConditionalLaw law;
  const double ratio = scenario.delta * scenario.sigma_w() / scenario.sigma_x();
  law.mean = ratio * confounding_direction(factors, x);
  const double scale = scenario.sigma_w() * std::sqrt(1.0 - scenario.delta * scenario.delta);
  law.factor = scale * factors.confounder.root;
  law.covariance = law.factor * law.factor.transpose();
  return law;
}

ConditionalLaw conditional_law(const ConfoundingScenario& scenario, const SiteSet& sites,
                               const Vector& x) {
  return conditional_law(scenario, field_factors(scenario, sites), x);
}

FieldReplicate sample_replicate(const ConfoundingScenario& scenario, const ConditionalLaw& law,
                                const Vector& x, std::uint64_t seed) {
  const Eigen::Index n = x.size();
  if (law.mean.size() != n || law.factor.rows() != n) {
    throw UsageError("conditional law is inconsistent with the exposure");
  }
  Rng rng(seed);
  FieldReplicate rep;
  rep.seed = seed;
  rep.x = x;
  const Vector z = standard_normal_vector(law.factor.cols(), rng);
  rep.w = law.mean + law.factor * z;
  const Vector eps = std::sqrt(scenario.sigma2_eps) * standard_normal_vector(n, rng);
  rep.y = (scenario.beta0 + (scenario.beta_x * x).array()).matrix() + rep.w + eps;
  return rep;
}

double calibrate_sigma_w(const ConfoundingScenario& scenario, const FieldFactors& factors,
                         const Vector& x, double target_relative_bias) {
  if (!(target_relative_bias != 0.0) || !std::isfinite(target_relative_bias)) {
    throw CalibrationError("target relative bias must be nonzero");
  }
  ConfoundingScenario unit = scenario;
  unit.sigma2_w = 1.0;
  const double factor = delta_ols(unit, factors, x)(1);
  if (!std::isfinite(factor) || std::abs(factor) < 1e-14) {
    throw CalibrationError("OLS bias factor vanishes; sigma_w cannot be calibrated");
  }
  const double sigma_w = target_relative_bias * scenario.beta_x / factor;
  if (!(sigma_w > 0.0)) {
    throw CalibrationError(
        fmt::format("calibration requires sigma_w = {:.6g}, which is not positive", sigma_w));
  }
  return sigma_w;
}

double calibrate_sigma_w(const ConfoundingScenario& scenario, const SiteSet& sites,
                         const Vector& x, double target_relative_bias) {
  return calibrate_sigma_w(scenario, field_factors(scenario, sites), x, target_relative_bias);
}

}  // namespace spatconf
