#pragma once

#include <cstdint>
#include <vector>

#include "spatconf/spatial_core.hpp"

namespace spatconf {

// Generative parameters of the joint exposure / confounder / outcome model.
struct ConfoundingScenario {
  double phi_x = 0.2;
  double phi_w = 0.2;
  double delta = 0.5;
  double sigma2_x = 1.0;
  double sigma2_w = 1.0;
  double sigma2_eps = 0.25;
  double beta0 = 1.0;
  double beta_x = 2.0;

  double sigma_x() const;
  double sigma_w() const;
  // Throws UsageError when an invariant is violated.
  void validate() const;
};

// Square roots of the exposure and confounder correlation matrices for one
// (phi_x, phi_w) cell. Computed once and shared read-only across replicates.
struct FieldFactors {
  SqrtPair exposure;
  SqrtPair confounder;
  SqrtMethod method = SqrtMethod::SymmetricEigen;
};

FieldFactors field_factors(const ConfoundingScenario& scenario, const SiteSet& sites,
                           SqrtMethod method = SqrtMethod::SymmetricEigen);

struct ConditionalLaw {
  Vector mean;
  Matrix covariance;
  // factor * factor' == covariance
  Matrix factor;
};

struct FieldReplicate {
  Vector x;
  Vector w;
  Vector y;
  std::uint64_t seed = 0;
};

// Uniform draw of n distinct nodes of a grid x grid lattice on [0,1]^2.
SiteSet sample_grid_sites(std::size_t n, std::size_t grid, std::uint64_t seed);

// R_w^{1/2} R_x^{-1/2} x: the direction of E[W | X = x].
Vector confounding_direction(const FieldFactors& factors, const Vector& x);

Vector sample_exposure(const ConfoundingScenario& scenario, const FieldFactors& factors,
                       std::uint64_t seed);
Vector sample_exposure(const ConfoundingScenario& scenario, const SiteSet& sites,
                       std::uint64_t seed);

ConditionalLaw conditional_law(const ConfoundingScenario& scenario, const FieldFactors& factors,
                               const Vector& x);
ConditionalLaw conditional_law(const ConfoundingScenario& scenario, const SiteSet& sites,
                               const Vector& x);

FieldReplicate sample_replicate(const ConfoundingScenario& scenario, const ConditionalLaw& law,
                                const Vector& x, std::uint64_t seed);

// sigma_w that makes Delta_OLS / beta_x equal `target_relative_bias`.
// Delta_OLS is linear in sigma_w, so the bias factor at sigma_w = 1 is scaled.
double calibrate_sigma_w(const ConfoundingScenario& scenario, const FieldFactors& factors,
                         const Vector& x, double target_relative_bias);
double calibrate_sigma_w(const ConfoundingScenario& scenario, const SiteSet& sites,
                         const Vector& x, double target_relative_bias);

}  // namespace spatconf
