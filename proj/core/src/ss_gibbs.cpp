#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spatconf/errors.hpp"
#include "spatconf/ss_regression.hpp"

namespace spatconf {

void SsPriorConfig::validate() const {
  const bool positive = V_beta > 0 && a > 0 && b > 0 && c0 > 0 && psi2 > 0 && a_psi > 0 &&
                        b_psi > 0 && nu > 0;
  if (!positive) throw UsageError("prior hyperparameters must be positive");
  if (!(c0 < 1.0)) throw UsageError("spike shrinkage c0 must be below 1");
  if (!(w > 0.0 && w < 1.0)) throw UsageError("inclusion probability w must lie in (0, 1)");
}

SsData::SsData(const Vector& y, const Vector& x, const Matrix& basis) {
  const Eigen::Index n = y.size();
  if (x.size() != n || basis.rows() != n) throw UsageError("y, x and basis lengths differ");
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    if (basis.col(j).cwiseAbs().maxCoeff() == 0.0) {
      throw UsageError(fmt::format("basis column {} is identically zero", j));
    }
  }
  a_.resize(n, basis.cols() + 2);
  a_.col(0).setOnes();
  a_.col(1) = x;
  a_.rightCols(basis.cols()) = basis;
  gram_.noalias() = a_.transpose() * a_;
  set_response(y);
}

void SsData::set_response(const Vector& y) {
  if (y.size() != a_.rows()) throw UsageError("response length differs from the design");
  y_ = y;
  aty_.noalias() = a_.transpose() * y;
  yty_ = y.squaredNorm();
}

GibbsSampler::GibbsSampler(const SsData& data, const SsPriorConfig& prior)
    : data_(data), prior_(prior) {
  prior_.validate();
  if (prior_.family == PriorFamily::MOM) throw UsageError("Gibbs kernel needs the FV or NMIG prior");
}

ModelState GibbsSampler::initial_state() const {
  const Eigen::Index p = data_.bases();
  ModelState s;
  s.beta = Vector::Zero(2);
  s.xi = Vector::Zero(p);
  s.gamma.assign(static_cast<std::size_t>(p), 0);
  s.sigma2 = std::max(data_.yty() / static_cast<double>(data_.n()), 1e-6);
  s.psi2 = Vector::Constant(p, prior_.family == PriorFamily::NMIG
                                   ? prior_.b_psi / (prior_.a_psi + 1.0)
                                   : prior_.psi2);
  s.w = prior_.w;
  return s;
}

double GibbsSampler::inclusion_conditional(double xi, double psi2, double w) const {
  const double log_m1 = std::log(w) - xi * xi / (2.0 * psi2);
  const double log_m0 =
      std::log1p(-w) - 0.5 * std::log(prior_.c0) - xi * xi / (2.0 * prior_.c0 * psi2);
  return 1.0 / (1.0 + std::exp(log_m0 - log_m1));
}

void GibbsSampler::sweep(ModelState& s, Rng& rng, bool update_gamma) const {
  const Eigen::Index p = data_.bases();
  const double n = static_cast<double>(data_.n());

  if (update_gamma) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double p1 = inclusion_conditional(s.xi(j), s.psi2(j), s.w);
      s.gamma[static_cast<std::size_t>(j)] = draw_uniform(rng) < p1 ? 1 : 0;
    }
  }
  if (prior_.beta_w) {
    double in = 0.0;
    for (auto g : s.gamma) in += g;
    const double g1 = draw_gamma(1.0 + in, rng);
    const double g0 = draw_gamma(1.0 + static_cast<double>(p) - in, rng);
    s.w = std::clamp(g1 / (g1 + g0), 1e-12, 1.0 - 1e-12);
  }
  if (prior_.family == PriorFamily::NMIG) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double scale = s.gamma[static_cast<std::size_t>(j)] ? 1.0 : prior_.c0;
      s.psi2(j) = draw_inverse_gamma(prior_.a_psi + 0.5,
                                     prior_.b_psi + s.xi(j) * s.xi(j) / (2.0 * scale), rng);
    }
  }

  Vector theta(p + 2);
  theta << s.beta, s.xi;
  const double rss = (data_.y() - data_.design() * theta).squaredNorm();
  s.sigma2 = draw_inverse_gamma(prior_.a + 0.5 * n, prior_.b + 0.5 * rss, rng);

  Matrix f_inv = data_.gram() / s.sigma2;
  f_inv(0, 0) += 1.0 / prior_.V_beta;
  f_inv(1, 1) += 1.0 / prior_.V_beta;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = s.psi2(j) * (s.gamma[static_cast<std::size_t>(j)] ? 1.0 : prior_.c0);
    f_inv(j + 2, j + 2) += 1.0 / var;
  }
  Eigen::LLT<Matrix> llt(f_inv);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior precision F^{-1} is not PSD");
  const Vector mean = llt.solve(data_.aty() / s.sigma2);
  const Vector z = standard_normal_vector(p + 2, rng);
  theta = mean + llt.matrixU().solve(z);
  s.beta = theta.head(2);
  s.xi = theta.tail(p);
}

ModelState GibbsSampler::draw_prior(Rng& rng) const {
  const Eigen::Index p = data_.bases();
  ModelState s = initial_state();
  s.w = prior_.beta_w ? draw_uniform(rng) : prior_.w;
  for (Eigen::Index j = 0; j < p; ++j) {
    s.gamma[static_cast<std::size_t>(j)] = draw_uniform(rng) < s.w ? 1 : 0;
    s.psi2(j) = prior_.family == PriorFamily::NMIG
                    ? draw_inverse_gamma(prior_.a_psi, prior_.b_psi, rng)
                    : prior_.psi2;
    const double var = s.psi2(j) * (s.gamma[static_cast<std::size_t>(j)] ? 1.0 : prior_.c0);
    s.xi(j) = std::sqrt(var) * draw_normal(rng);
  }
  s.beta = std::sqrt(prior_.V_beta) * standard_normal_vector(2, rng);
  s.sigma2 = draw_inverse_gamma(prior_.a, prior_.b, rng);
  return s;
}

namespace {

PosteriorChain run_gibbs(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg) {
  if (cfg.burn_in >= cfg.iterations) throw UsageError("burn-in must be shorter than the chain");
  if (cfg.thin == 0) throw UsageError("thinning must be at least 1");
  GibbsSampler sampler(data, prior);
  Rng rng(cfg.seed);
  ModelState state = sampler.initial_state();
  bool update_gamma = true;
  if (cfg.fixed_gamma) {
    if (cfg.fixed_gamma->size() != static_cast<std::size_t>(data.bases())) {
      throw UsageError("fixed inclusion pattern has the wrong length");
    }
    state.gamma = *cfg.fixed_gamma;
    update_gamma = false;
  }
  PosteriorChain chain;
  chain.family = prior.family;
  chain.burn_in = cfg.burn_in;
  chain.thin = cfg.thin;
  chain.draws.reserve((cfg.iterations - cfg.burn_in) / cfg.thin + 1);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    sampler.sweep(state, rng, update_gamma);
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) chain.draws.push_back(state);
  }
  return chain;
}

}  // namespace

PosteriorChain gibbs_fv(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg) {
  if (prior.family != PriorFamily::FV) throw UsageError("gibbs_fv needs the FV prior family");
  return run_gibbs(data, prior, cfg);
}

PosteriorChain gibbs_nmig(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg) {
  if (prior.family != PriorFamily::NMIG) throw UsageError("gibbs_nmig needs the NMIG prior family");
  return run_gibbs(data, prior, cfg);
}

}  // namespace spatconf
