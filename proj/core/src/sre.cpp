#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "spatconf/competitors.hpp"
#include "spatconf/errors.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/rng.hpp"
#include "spatconf/standardize.hpp"

namespace spatconf {

namespace {

struct SreState {
  Vector eta;  // (log phi, log s_w^2, log s_e^2)
  double log_post = 0.0;
  Eigen::LLT<Matrix> chol;  // of the marginal covariance with beta integrated out
};

class SreTarget {
 public:
  SreTarget(const Vector& y, const Matrix& xt, const Matrix& dist, const SreConfig& cfg,
            double range_lo, double range_hi)
      : y_(y), xt_(xt), dist_(dist), cfg_(cfg), log_lo_(std::log(range_lo)),
        log_hi_(std::log(range_hi)) {}

  // Log posterior of eta under the marginal likelihood with beta ~ N(0, v I)
  // integrated out; includes log-Jacobians of the log transforms.
  bool evaluate(const Vector& eta, SreState& out) const {
    if (eta(0) < log_lo_ || eta(0) > log_hi_) return false;
    const double phi = std::exp(eta(0));
    const double sw2 = std::exp(eta(1));
    const double se2 = std::exp(eta(2));
    const Eigen::Index n = y_.size();
    Matrix cov = (-dist_.array() / phi).exp().matrix() * sw2;
    cov.diagonal().array() += se2;
    cov.noalias() += cfg_.beta_prior_variance * (xt_ * xt_.transpose());
    out.chol.compute(cov);
    if (out.chol.info() != Eigen::Success) return false;
    const Vector alpha = out.chol.matrixL().solve(y_);
    const double logdet = 2.0 * out.chol.matrixLLT().diagonal().array().log().sum();
    double lp = -0.5 * (alpha.squaredNorm() + logdet + static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
    const double a = cfg_.variance_shape, b = cfg_.variance_scale;
    // IG priors on exp(eta) with Jacobian: -a * eta - b * exp(-eta).
    lp += -a * eta(1) - b * std::exp(-eta(1));
    lp += -a * eta(2) - b * std::exp(-eta(2));
    out.eta = eta;
    out.log_post = lp;
    return true;
  }

  // Conditional law of beta given the covariance parameters: mean and the
  // upper Cholesky factor of its precision.
  void beta_conditional(const Vector& eta, Vector& mean, Matrix& prec_upper) const {
    const double phi = std::exp(eta(0));
    Matrix cov = (-dist_.array() / phi).exp().matrix() * std::exp(eta(1));
    cov.diagonal().array() += std::exp(eta(2));
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("SRE covariance lost definiteness");
    const Matrix sx = llt.solve(xt_);
    Matrix prec = xt_.transpose() * sx;
    prec.diagonal().array() += 1.0 / cfg_.beta_prior_variance;
    Eigen::LLT<Matrix> pl(prec);
    mean = pl.solve(sx.transpose() * y_);
    prec_upper = pl.matrixU();
  }

 private:
  const Vector& y_;
  const Matrix& xt_;
  const Matrix& dist_;
  const SreConfig& cfg_;
  double log_lo_, log_hi_;
};

}  // namespace

FitResult fit_sre(const Vector& y, const Vector& x, const SiteSet& sites, const SreConfig& cfg) {
  const Eigen::Index n = y.size();
  if (x.size() != n || static_cast<Eigen::Index>(sites.size()) != n) {
    throw UsageError("y, x and sites lengths differ");
  }
  if (cfg.burn_in >= cfg.iterations) throw UsageError("burn-in must be shorter than the chain");
  const auto sd = standardize(y, x, Matrix(n, 0));
  const Matrix xt = intercept_design(sd.x);
  const Matrix dist = distance_matrix(sites);
  const double dmax = dist.maxCoeff();
  const SreTarget target(sd.y, xt, dist, cfg, cfg.range_lo * dmax, cfg.range_hi * dmax);

  Rng rng(cfg.seed);
  SreState cur;
  Vector eta0(3);
  eta0 << std::log(0.1 * dmax), std::log(0.5), std::log(0.5);
  if (!target.evaluate(eta0, cur)) throw NumericalError("SRE starting point is infeasible");

  // Random-walk Metropolis on eta with per-coordinate scales tuned during
  // burn-in toward a 0.3 acceptance rate, then frozen.
  Vector step = Vector::Constant(3, 0.3);
  std::size_t window_acc = 0, window = 0, accepted_after = 0;
  std::vector<double> beta_x;
  beta_x.reserve(cfg.iterations - cfg.burn_in);
  SreState cand;
  Vector beta_mean;
  Matrix beta_prec_upper;
  bool beta_stale = true;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Vector prop = cur.eta + step.cwiseProduct(standard_normal_vector(3, rng));
    bool accept = false;
    if (target.evaluate(prop, cand)) {
      accept = std::log(draw_uniform(rng)) < cand.log_post - cur.log_post;
    } else {
      draw_uniform(rng);
    }
    if (accept) {
      std::swap(cur, cand);
      beta_stale = true;
    }
    if (it < cfg.burn_in) {
      window_acc += accept;
      if (++window == 50) {
        const double rate = static_cast<double>(window_acc) / 50.0;
        step *= std::exp(rate - 0.3);
        window = window_acc = 0;
      }
    } else {
      accepted_after += accept;
      if (beta_stale) {
        target.beta_conditional(cur.eta, beta_mean, beta_prec_upper);
        beta_stale = false;
      }
      const Vector z = standard_normal_vector(2, rng);
      const Vector beta =
          beta_mean + beta_prec_upper.triangularView<Eigen::Upper>().solve(z);
      beta_x.push_back(beta(1));
    }
  }

  FitResult r;
  r.method = MethodId::SRE;
  for (double& b : beta_x) b = destandardize_beta_x(sd.record, b);
  double sum = 0.0;
  for (double b : beta_x) sum += b;
  r.beta_x_hat = sum / static_cast<double>(beta_x.size());
  std::sort(beta_x.begin(), beta_x.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(beta_x.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, beta_x.size() - 1);
    return beta_x[lo] + (h - static_cast<double>(lo)) * (beta_x[hi] - beta_x[lo]);
  };
  r.lo = q(0.025);
  r.hi = q(0.975);
  const double rate = static_cast<double>(accepted_after) /
                      static_cast<double>(cfg.iterations - cfg.burn_in);
  r.diagnostics["acceptance"] = fmt::format("{:.3f}", rate);
  r.diagnostics["range"] = fmt::format("{:.6g}", std::exp(cur.eta(0)));
  if (rate < 0.1 || rate > 0.6) {
    r.diagnostics["warning"] = fmt::format("Metropolis acceptance {:.3f} outside [0.1, 0.6]", rate);
  }
  return r;
}

}  // namespace spatconf
