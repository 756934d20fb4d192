#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spatconf/rng.hpp"
#include "spatconf/standardize.hpp"

namespace spatconf {

enum class PriorFamily { FV, NMIG, MOM };

std::string to_string(PriorFamily family);
PriorFamily prior_family_from_string(const std::string& name);

struct SsPriorConfig {
  PriorFamily family = PriorFamily::MOM;
  double V_beta = 1.0;
  double a = 2.0;
  double b = 0.1;
  double w = 0.5;
  double c0 = 1e-4;
  double psi2 = 1.0;
  double a_psi = 2.0;
  double b_psi = 1.0;
  double nu = 0.348;
  // FV / NMIG: draw w ~ Beta(1 + #in, 1 + #out) instead of keeping it fixed.
  bool beta_w = false;

  void validate() const;
};

struct ChainConfig {
  std::size_t iterations = 5000;  // total, including burn-in
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  // MOM: model-space proposals per iteration.
  std::size_t model_moves = 10;
  // FV / NMIG: keep the inclusion indicators fixed at this pattern.
  std::optional<std::vector<std::uint8_t>> fixed_gamma;
};

struct ModelState {
  Vector beta;  // (beta0, beta_x)
  Vector xi;
  std::vector<std::uint8_t> gamma;
  double sigma2 = 1.0;
  Vector psi2;
  double w = 0.5;
};

struct PosteriorChain {
  PriorFamily family = PriorFamily::MOM;
  std::vector<ModelState> draws;  // retained draws after burn-in and thinning
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  StandardizationRecord record;  // identity unless the data were standardized
  std::unordered_map<std::string, double> diagnostics;

  // Fraction of retained draws with gamma_j = 1.
  Vector inclusion_probabilities() const;
};

// Data held on the working (typically standardized) scale with design
// A = [1 x B] and its Gram matrix precomputed.
class SsData {
 public:
  SsData(const Vector& y, const Vector& x, const Matrix& basis);

  const Vector& y() const { return y_; }
  const Matrix& design() const { return a_; }
  const Matrix& gram() const { return gram_; }
  const Vector& aty() const { return aty_; }
  double yty() const { return yty_; }
  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index bases() const { return a_.cols() - 2; }
  // Replaces y (design unchanged); used by joint-distribution tests.
  void set_response(const Vector& y);

 private:
  Vector y_;
  Matrix a_;
  Matrix gram_;
  Vector aty_;
  double yty_ = 0.0;
};

// Gibbs kernel for the FV and NMIG priors.
class GibbsSampler {
 public:
  GibbsSampler(const SsData& data, const SsPriorConfig& prior);

  ModelState initial_state() const;
  // One sweep: gamma (unless `fixed` is set), psi2 (NMIG), w (beta_w), sigma2, theta.
  void sweep(ModelState& state, Rng& rng, bool update_gamma = true) const;
  // Exact draw from the prior (used to check the kernel against its joint law).
  ModelState draw_prior(Rng& rng) const;
  // Pr(gamma_j = 1 | xi_j, psi2_j) under the current w.
  double inclusion_conditional(double xi, double psi2, double w) const;

 private:
  const SsData& data_;
  SsPriorConfig prior_;
};

PosteriorChain gibbs_fv(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg);
PosteriorChain gibbs_nmig(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg);

// Laplace approximation of the pMOM marginal likelihood of one model,
// with the integral taken over (beta, xi_S, log sigma2).
struct LaplaceFit {
  double log_marginal = 0.0;  // log p(y | model), without the model prior
  Vector mode;                // (beta, xi_S, log sigma2)
  Matrix neg_hessian_llt;     // lower Cholesky factor of -H at the mode
  int newton_iterations = 0;
};

class MomModelSpace {
 public:
  MomModelSpace(const SsData& data, const SsPriorConfig& prior);

  // `model` lists included basis indices in increasing order.
  // Throws ModeSearchError when the Newton search fails.
  LaplaceFit laplace(const std::vector<int>& model) const;
  // Log joint density of (y, beta, xi_S, log sigma2) for this model.
  double log_joint(const std::vector<int>& model, const Vector& params) const;
  // Beta-Binomial(1, 1) prior over inclusion patterns of size k.
  double log_model_prior(std::size_t k) const;
  Eigen::Index bases() const { return data_.bases(); }
  const SsData& data() const { return data_; }

 private:
  void gradient_hessian(const std::vector<int>& model, const Vector& params, double& value,
                        Vector& grad, Matrix& hess) const;

  const SsData& data_;
  SsPriorConfig prior_;
};

PosteriorChain mom_sampler(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg);

// Dispatches on prior.family after standardizing (y, x, B); the returned
// chain carries the standardization record for summarize().
PosteriorChain fit_spike_slab(const Vector& y, const Vector& x, const Matrix& basis,
                              const SsPriorConfig& prior, const ChainConfig& cfg);

struct ChainSummary {
  double beta_x_mean = 0.0;
  double beta_x_median = 0.0;
  double lo = 0.0;  // 2.5%
  double hi = 0.0;  // 97.5%
  Vector inclusion;
  std::size_t edf = 0;  // bases with inclusion probability > 0.5
};

// Summaries of beta_x on the original scale. Throws UsageError on an empty chain.
ChainSummary summarize(const PosteriorChain& chain);

}  // namespace spatconf
