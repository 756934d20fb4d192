#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spatconf/principal_basis.hpp"

namespace spatconf {

// Estimators available to the harness. The first seven are the comparison
// methods; the SS_* entries are the spike-and-slab fits.
enum class MethodId { OLS, SRE, SpatialTP, SpatialPlusFx, SpatialPlus, GSEM, KS, SS_fv, SS_nmig, SS_mom };

std::string to_string(MethodId method);
MethodId method_from_string(const std::string& name);
const std::vector<MethodId>& all_methods();

struct FitResult {
  MethodId method = MethodId::OLS;
  double beta_x_hat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> edf;
  std::map<std::string, std::string> diagnostics;
};

FitResult fit_ols(const Vector& y, const Vector& x);

struct SreConfig {
  std::size_t iterations = 3000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 1;
  double beta_prior_variance = 100.0;
  // IG(shape, scale) on both variance components (standardized scale).
  double variance_shape = 2.0;
  double variance_scale = 1.0;
  // Log-uniform prior on the range over [lo, hi] * max pairwise distance.
  double range_lo = 0.01;
  double range_hi = 1.0;
};

// Bayesian Gaussian-process regression y ~ N([1 x] beta, s_w^2 R_phi + s_e^2 I)
// with beta integrated out inside the Metropolis steps.
FitResult fit_sre(const Vector& y, const Vector& x, const SiteSet& sites, const SreConfig& cfg);

struct SplineConfig {
  std::size_t k_max = 150;
  std::vector<std::size_t> ks_grid = {10, 30, 50, 70, 90, 110, 130, 150, 170, 190, 210, 230, 250};
  int gcv_grid_points = 61;
  // Overrides GCV with a fixed smoothing parameter (0 = unpenalized).
  std::optional<double> fixed_lambda;
};

// SpatialTP, SpatialPlusFx, SpatialPlus, GSEM or KS. `tprs` must have rank at
// least max(k_max, largest usable KS grid value) after capping at n - 4.
FitResult fit_spline_family(MethodId method, const Vector& y, const Vector& x,
                            const TprsBasis& tprs, const SplineConfig& cfg);
FitResult fit_spline_family(MethodId method, const Vector& y, const Vector& x,
                            const SiteSet& sites, const SplineConfig& cfg);

// Rank of the TPRS basis a site set needs for `cfg`.
std::size_t required_tprs_rank(std::size_t n, const SplineConfig& cfg);

}  // namespace spatconf
