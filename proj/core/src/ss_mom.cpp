#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>

#include <fmt/format.h>

#include "spatconf/errors.hpp"
#include "spatconf/ss_regression.hpp"

namespace spatconf {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::vector<Eigen::Index> design_columns(const std::vector<int>& model) {
  std::vector<Eigen::Index> idx{0, 1};
  for (int j : model) idx.push_back(j + 2);
  return idx;
}

Matrix sub_gram(const Matrix& gram, const std::vector<Eigen::Index>& idx) {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Matrix g(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) g(r, c) = gram(idx[r], idx[c]);
  }
  return g;
}

Vector sub_vector(const Vector& v, const std::vector<Eigen::Index>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

}  // namespace

MomModelSpace::MomModelSpace(const SsData& data, const SsPriorConfig& prior)
    : data_(data), prior_(prior) {
  prior_.validate();
}

double MomModelSpace::log_model_prior(std::size_t k) const {
  const auto p = static_cast<double>(data_.bases());
  const auto kk = static_cast<double>(k);
  // 1 / ((p + 1) * C(p, k))
  return -std::log(p + 1.0) - (std::lgamma(p + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(p - kk + 1.0));
}

double MomModelSpace::log_joint(const std::vector<int>& model, const Vector& params) const {
  const auto idx = design_columns(model);
  const auto m = static_cast<Eigen::Index>(idx.size());
  if (params.size() != m + 1) throw UsageError("parameter vector length does not match the model");
  const Vector theta = params.head(m);
  const double eta = params(m);
  const double s = std::exp(-eta);
  const Matrix g = sub_gram(data_.gram(), idx);
  const Vector aty = sub_vector(data_.aty(), idx);
  const double rss = std::max(data_.yty() - 2.0 * theta.dot(aty) + theta.dot(g * theta), 0.0);
  const double n = static_cast<double>(data_.n());
  const double nu = prior_.nu;

  double v = -0.5 * n * kLog2Pi - 0.5 * n * eta - 0.5 * s * rss;
  v += -std::log(2.0 * std::numbers::pi * prior_.V_beta) -
       (theta(0) * theta(0) + theta(1) * theta(1)) / (2.0 * prior_.V_beta);
  for (Eigen::Index j = 2; j < m; ++j) {
    const double xi = theta(j);
    if (xi == 0.0) return -std::numeric_limits<double>::infinity();
    v += std::log(xi * xi) - std::log(nu) - 1.5 * eta - 0.5 * (kLog2Pi + std::log(nu)) -
         s * xi * xi / (2.0 * nu);
  }
  v += prior_.a * std::log(prior_.b) - std::lgamma(prior_.a) - prior_.a * eta - prior_.b * s;
  return v;
}

void MomModelSpace::gradient_hessian(const std::vector<int>& model, const Vector& params,
                                     double& value, Vector& grad, Matrix& hess) const {
  const auto idx = design_columns(model);
  const auto m = static_cast<Eigen::Index>(idx.size());
  const Vector theta = params.head(m);
  const double eta = params(m);
  const double s = std::exp(-eta);
  const Matrix g = sub_gram(data_.gram(), idx);
  const Vector aty = sub_vector(data_.aty(), idx);
  const Vector score = aty - g * theta;  // A'(y - A theta)
  const double rss = std::max(data_.yty() - 2.0 * theta.dot(aty) + theta.dot(g * theta), 0.0);
  const double n = static_cast<double>(data_.n());
  const double nu = prior_.nu;
  const double k = static_cast<double>(m - 2);

  value = log_joint(model, params);
  grad.resize(m + 1);
  hess.resize(m + 1, m + 1);

  grad.head(m) = s * score;
  hess.topLeftCorner(m, m) = -s * g;
  hess.col(m).head(m) = -s * score;
  double xi_sq = 0.0;
  for (Eigen::Index j = 0; j < 2; ++j) {
    grad(j) -= theta(j) / prior_.V_beta;
    hess(j, j) -= 1.0 / prior_.V_beta;
  }
  for (Eigen::Index j = 2; j < m; ++j) {
    const double xi = theta(j);
    xi_sq += xi * xi;
    grad(j) += 2.0 / xi - s * xi / nu;
    hess(j, j) += -2.0 / (xi * xi) - s / nu;
    hess(j, m) += s * xi / nu;
  }
  grad(m) = -0.5 * n + 0.5 * s * rss - 1.5 * k + 0.5 * s * xi_sq / nu - prior_.a + prior_.b * s;
  hess(m, m) = -0.5 * s * rss - 0.5 * s * xi_sq / nu - prior_.b * s;
  hess.row(m).head(m) = hess.col(m).head(m).transpose();
}

LaplaceFit MomModelSpace::laplace(const std::vector<int>& model) const {
  const auto idx = design_columns(model);
  const auto m = static_cast<Eigen::Index>(idx.size());
  const double n = static_cast<double>(data_.n());
  if (m + 2 >= data_.n()) throw ModeSearchError("model has too many bases for the data");

  // Start from a lightly ridged least-squares fit, moving each xi to the
  // pMOM-tilted one-dimensional mode on the same side of zero.
  Matrix g = sub_gram(data_.gram(), idx);
  const Vector aty = sub_vector(data_.aty(), idx);
  Matrix gr = g;
  gr.diagonal().array() += 1e-8 * (1.0 + g.diagonal().maxCoeff());
  Eigen::LLT<Matrix> ls(gr);
  if (ls.info() != Eigen::Success) throw ModeSearchError("model design is singular");
  Vector theta = ls.solve(aty);
  const double rss = std::max(data_.yty() - 2.0 * theta.dot(aty) + theta.dot(g * theta), 0.0);
  const double sigma2 = std::max(rss / n, 1e-6 * data_.yty() / n + 1e-12);
  const Matrix ginv_diag = ls.solve(Matrix::Identity(m, m));
  for (Eigen::Index j = 2; j < m; ++j) {
    const double hat = theta(j);
    const double v = sigma2 * ginv_diag(j, j);
    const double sign = hat < 0.0 ? -1.0 : 1.0;
    theta(j) = 0.5 * (hat + sign * std::sqrt(hat * hat + 8.0 * v));
  }
  Vector x(m + 1);
  x << theta, std::log(sigma2);

  LaplaceFit fit;
  double value = 0.0;
  Vector grad;
  Matrix hess;
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    gradient_hessian(model, x, value, grad, hess);
    if (!std::isfinite(value)) throw ModeSearchError("log posterior is not finite at the iterate");
    Matrix neg = -hess;
    Eigen::LLT<Matrix> llt(neg);
    double damping = 0.0;
    while (llt.info() != Eigen::Success) {
      damping = damping == 0.0 ? 1e-6 * (1.0 + neg.diagonal().cwiseAbs().maxCoeff()) : damping * 10.0;
      if (damping > 1e12) throw ModeSearchError("could not regularize the Hessian");
      Matrix shifted = neg;
      shifted.diagonal().array() += damping;
      llt.compute(shifted);
    }
    const Vector step = llt.solve(grad);
    const double decrement = grad.dot(step);
    fit.newton_iterations = it + 1;
    if (damping == 0.0 && decrement < 1e-12) {
      converged = true;
      break;
    }
    double t = 1.0;
    bool moved = false;
    while (t > 1e-12) {
      Vector cand = x + t * step;
      bool same_side = true;
      for (Eigen::Index j = 2; j < m; ++j) {
        if (cand(j) * x(j) <= 0.0) {
          same_side = false;
          break;
        }
      }
      if (same_side) {
        const double cv = log_joint(model, cand);
        if (std::isfinite(cv) && cv >= value - 1e-12 * std::abs(value)) {
          x = std::move(cand);
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) {
      // No ascent direction left; accept if the Hessian is proper here.
      if (damping == 0.0 && decrement < 1e-8) {
        converged = true;
        break;
      }
      throw ModeSearchError("line search failed to improve the log posterior");
    }
  }
  if (!converged) throw ModeSearchError("Newton search did not converge in 200 iterations");

  gradient_hessian(model, x, value, grad, hess);
  Eigen::LLT<Matrix> llt(-hess);
  if (llt.info() != Eigen::Success) throw ModeSearchError("Hessian at the mode is not negative definite");
  const Matrix l = llt.matrixL();
  fit.mode = x;
  fit.neg_hessian_llt = l;
  fit.log_marginal = value + 0.5 * static_cast<double>(m + 1) * kLog2Pi -
                     l.diagonal().array().log().sum();
  return fit;
}

namespace {

std::string model_key(const std::vector<int>& model) {
  std::string key;
  key.reserve(model.size() * sizeof(int));
  for (int j : model) key.append(reinterpret_cast<const char*>(&j), sizeof(int));
  return key;
}

struct MoveWeights {
  double add = 0.0, del = 0.0, swap = 0.0;
};

MoveWeights move_weights(std::size_t k, std::size_t p, std::size_t kmax) {
  MoveWeights w;
  if (k < p && k < kmax) w.add = 0.45;
  if (k > 0) w.del = 0.45;
  if (k > 0 && k < p) w.swap = 0.10;
  const double total = w.add + w.del + w.swap;
  w.add /= total;
  w.del /= total;
  w.swap /= total;
  return w;
}

// Draw from N(mode, (L L')^{-1}) and its log density up to a constant.
Vector draw_from_fit(const LaplaceFit& fit, Rng& rng) {
  const Vector z = standard_normal_vector(fit.mode.size(), rng);
  return fit.mode + fit.neg_hessian_llt.transpose().triangularView<Eigen::Upper>().solve(z);
}

double log_proposal(const LaplaceFit& fit, const Vector& v) {
  const Vector d = fit.neg_hessian_llt.transpose() * (v - fit.mode);
  return -0.5 * d.squaredNorm();
}

}  // namespace

PosteriorChain mom_sampler(const SsData& data, const SsPriorConfig& prior, const ChainConfig& cfg) {
  if (prior.family != PriorFamily::MOM) throw UsageError("mom_sampler needs the MOM prior family");
  if (cfg.burn_in >= cfg.iterations) throw UsageError("burn-in must be shorter than the chain");
  if (cfg.thin == 0) throw UsageError("thinning must be at least 1");
  MomModelSpace space(data, prior);
  const auto p = static_cast<std::size_t>(data.bases());
  const auto kmax = static_cast<std::size_t>(std::max<Eigen::Index>(data.n() - 4, 0));
  Rng rng(cfg.seed);

  std::unordered_map<std::string, std::optional<LaplaceFit>> cache;
  std::size_t mode_failures = 0;
  auto evaluate = [&](const std::vector<int>& model) -> const std::optional<LaplaceFit>& {
    auto key = model_key(model);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::optional<LaplaceFit> fit;
    try {
      fit = space.laplace(model);
    } catch (const ModeSearchError&) {
      ++mode_failures;
    }
    return cache.emplace(std::move(key), std::move(fit)).first->second;
  };

  std::vector<int> model;
  std::vector<std::uint8_t> included(p, 0);
  const auto& start = evaluate(model);
  if (!start) throw ModeSearchError("mode search failed for the model without bases");
  LaplaceFit current = *start;
  double current_target = current.log_marginal + space.log_model_prior(0);
  Vector params = current.mode;
  double params_logp = space.log_joint(model, params);

  std::size_t model_proposals = 0, model_accepts = 0, within_accepts = 0;
  PosteriorChain chain;
  chain.family = PriorFamily::MOM;
  chain.burn_in = cfg.burn_in;
  chain.thin = cfg.thin;
  chain.draws.reserve((cfg.iterations - cfg.burn_in) / cfg.thin + 1);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t mv = 0; mv < cfg.model_moves && p > 0; ++mv) {
      const std::size_t k = model.size();
      const MoveWeights w = move_weights(k, p, kmax);
      const double u = draw_uniform(rng);
      std::vector<int> proposal = model;
      double log_q_ratio = 0.0;  // log q(back) - log q(forward)
      if (u < w.add) {
        std::uniform_int_distribution<std::size_t> pick(0, p - k - 1);
        std::size_t target = pick(rng);
        int chosen = -1;
        for (std::size_t j = 0; j < p; ++j) {
          if (!included[j] && target-- == 0) {
            chosen = static_cast<int>(j);
            break;
          }
        }
        proposal.insert(std::upper_bound(proposal.begin(), proposal.end(), chosen), chosen);
        const MoveWeights back = move_weights(k + 1, p, kmax);
        log_q_ratio = std::log(back.del) - std::log(static_cast<double>(k + 1)) -
                      (std::log(w.add) - std::log(static_cast<double>(p - k)));
      } else if (u < w.add + w.del) {
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        proposal.erase(proposal.begin() + static_cast<std::ptrdiff_t>(pick(rng)));
        const MoveWeights back = move_weights(k - 1, p, kmax);
        log_q_ratio = std::log(back.add) - std::log(static_cast<double>(p - k + 1)) -
                      (std::log(w.del) - std::log(static_cast<double>(k)));
      } else {
        std::uniform_int_distribution<std::size_t> pick_out(0, k - 1);
        std::uniform_int_distribution<std::size_t> pick_in(0, p - k - 1);
        const std::size_t out_pos = pick_out(rng);
        std::size_t target = pick_in(rng);
        int chosen = -1;
        for (std::size_t j = 0; j < p; ++j) {
          if (!included[j] && target-- == 0) {
            chosen = static_cast<int>(j);
            break;
          }
        }
        proposal.erase(proposal.begin() + static_cast<std::ptrdiff_t>(out_pos));
        proposal.insert(std::upper_bound(proposal.begin(), proposal.end(), chosen), chosen);
      }
      ++model_proposals;
      const auto& fit = evaluate(proposal);
      if (!fit) continue;
      const double target = fit->log_marginal + space.log_model_prior(proposal.size());
      if (std::log(draw_uniform(rng)) < target - current_target + log_q_ratio) {
        for (int j : model) included[static_cast<std::size_t>(j)] = 0;
        for (int j : proposal) included[static_cast<std::size_t>(j)] = 1;
        model = std::move(proposal);
        current = *fit;
        current_target = target;
        params = draw_from_fit(current, rng);
        params_logp = space.log_joint(model, params);
        ++model_accepts;
      }
    }

    // Independence Metropolis step centred at the mode of the current model.
    const Vector cand = draw_from_fit(current, rng);
    const double cand_logp = space.log_joint(model, cand);
    const double log_ratio = cand_logp - params_logp + log_proposal(current, params) -
                             log_proposal(current, cand);
    if (std::isfinite(cand_logp) && std::log(draw_uniform(rng)) < log_ratio) {
      params = cand;
      params_logp = cand_logp;
      ++within_accepts;
    }

    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      ModelState s;
      const auto m = static_cast<Eigen::Index>(model.size());
      s.beta = params.head(2);
      s.xi = Vector::Zero(static_cast<Eigen::Index>(p));
      for (Eigen::Index j = 0; j < m; ++j) s.xi(model[static_cast<std::size_t>(j)]) = params(2 + j);
      s.gamma = included;
      s.sigma2 = std::exp(params(m + 2));
      chain.draws.push_back(std::move(s));
    }
  }
  chain.diagnostics["model_acceptance"] =
      model_proposals ? static_cast<double>(model_accepts) / static_cast<double>(model_proposals) : 0.0;
  chain.diagnostics["within_acceptance"] =
      static_cast<double>(within_accepts) / static_cast<double>(cfg.iterations);
  chain.diagnostics["mode_failures"] = static_cast<double>(mode_failures);
  chain.diagnostics["distinct_models"] = static_cast<double>(cache.size());
  return chain;
}

}  // namespace spatconf
