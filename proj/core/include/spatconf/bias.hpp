#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "spatconf/principal_basis.hpp"
#include "spatconf/simulator.hpp"

namespace spatconf {

// Every bias vector below is (intercept, exposure); the exposure bias is
// element 1. sigma2_eps never enters these noiseless expressions.

Vector delta_ols(const ConfoundingScenario& scenario, const FieldFactors& factors, const Vector& x);
Vector delta_ols(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x);

// Bias of GLS under Sigma_{y|x} = sigma2_eps I + Sigma_{w|x}.
Vector delta_gls(const ConfoundingScenario& scenario, const FieldFactors& factors, const Vector& x);
Vector delta_gls(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x);

// Change in expected OLS coefficients caused by adjoining the columns of B.
Vector d_x(const ConfoundingScenario& scenario, const FieldFactors& factors, const Vector& x,
           const Matrix& basis);
Vector d_x(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x,
           const Matrix& basis);

struct BiasReport {
  Vector delta_ols;
  std::optional<Vector> delta_gls;
  Vector d;
  Vector delta_adj;
  std::size_t k_used = 0;
  NullSpaceType nullspace = NullSpaceType::Type1;
};

BiasReport bias_report(const ConfoundingScenario& scenario, const FieldFactors& factors,
                       const Vector& x, const Matrix& basis, NullSpaceType nullspace,
                       bool with_gls = false);

struct BiasCurve {
  NullSpaceType nullspace = NullSpaceType::Type1;
  std::vector<std::size_t> k;
  std::vector<double> d_x;
};

// d_x using the first k columns of the basis, k = 1..max_k (default n - 3).
BiasCurve bias_curve(const ConfoundingScenario& scenario, const FieldFactors& factors,
                     const Vector& x, const PrincipalBasis& basis, std::size_t max_k = 0);
BiasCurve bias_curve(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x,
                     NullSpaceType nullspace, std::size_t max_k = 0);

// Posterior mean of theta in y = A theta + e, e ~ N(0, sigma2 I), theta ~
// N(0, diag(1 / precision)); zero precision entries are flat priors.
Vector posterior_mean_coefficients(const Matrix& design, const Vector& y,
                                   const Vector& prior_precision, double sigma2);

// Analytic posterior-minus-OLS difference for (beta0, beta_x) with flat
// priors on beta and N(0, prior_variances) on the basis coefficients.
Vector d_x_star(const Vector& y, const Vector& x, const Matrix& basis,
                const Vector& prior_variances, double sigma2);

}  // namespace spatconf
