#include <cmath>
#include <array>
#include <map>

#include <gtest/gtest.h>

#include <spatconf/ss_regression.hpp>

#include "oracles/marginals.hpp"

using namespace spatconf;

namespace {

struct Toy {
  Vector y, x;
  Matrix b;
};

// Standardized-scale data with one clear, one weak and the rest null bases.
Toy toy(std::uint64_t seed, Eigen::Index n, Eigen::Index p) {
  Rng rng(seed);
  Toy t;
  t.x = Vector::NullaryExpr(n, [&] { return draw_normal(rng); });
  t.b = Matrix::NullaryExpr(n, p, [&] { return draw_normal(rng); });
  t.y = (0.2 + 0.5 * t.x.array()).matrix() + 0.45 * t.b.col(0) +
        Vector::NullaryExpr(n, [&] { return 0.8 * draw_normal(rng); });
  if (p > 1) t.y += 0.15 * t.b.col(1);
  return t;
}

std::vector<double> model_frequencies(const PosteriorChain& chain, std::size_t p) {
  std::vector<double> f(std::size_t{1} << p, 0.0);
  for (const auto& d : chain.draws) {
    std::size_t mask = 0;
    for (std::size_t j = 0; j < p; ++j) mask |= static_cast<std::size_t>(d.gamma[j]) << j;
    f[mask] += 1.0;
  }
  for (auto& v : f) v /= static_cast<double>(chain.draws.size());
  return f;
}

}  // namespace

TEST(FvOracle, GibbsModelFrequenciesMatchEnumeration) {
  const auto t = toy(1, 30, 3);
  const SsData d(t.y, t.x, t.b);
  SsPriorConfig p;
  p.family = PriorFamily::FV;
  p.c0 = 0.01;
  const auto exact = oracle::fv_model_posterior(t.y, d.design(), p);
  ChainConfig c;
  c.iterations = 80000;
  c.burn_in = 2000;
  c.seed = 11;
  const auto chain = gibbs_fv(d, p, c);
  EXPECT_LT(oracle::total_variation(model_frequencies(chain, 3), exact), 0.03);
}

TEST(NmigOracle, InclusionProbabilityMatchesNestedQuadrature) {
  const auto t = toy(2, 25, 1);
  const SsData d(t.y, t.x, t.b);
  SsPriorConfig p;
  p.family = PriorFamily::NMIG;
  p.c0 = 0.01;
  const auto exact = oracle::nmig_model_posterior(t.y, d.design(), p);
  ChainConfig c;
  c.iterations = 80000;
  c.burn_in = 2000;
  c.seed = 12;
  const auto chain = gibbs_nmig(d, p, c);
  EXPECT_NEAR(chain.inclusion_probabilities()(0), exact[1], 0.03);
}

TEST(MomOracle, LaplaceMarginalsMatchFiniteDifferenceLaplace) {
  const auto t = toy(3, 40, 4);
  const SsData d(t.y, t.x, t.b);
  const SsPriorConfig p;
  const MomModelSpace space(d, p);
  for (std::size_t mask = 0; mask < 16; ++mask) {
    std::vector<int> model;
    for (int j = 0; j < 4; ++j) {
      if ((mask >> j) & 1U) model.push_back(j);
    }
    const auto got = space.laplace(model);
    const auto ref = oracle::mom_laplace(t.y, d.design(), model, p);
    EXPECT_NEAR(got.log_marginal, ref.log_marginal, 1e-5) << "mask " << mask;
    EXPECT_LT((got.mode - ref.mode).cwiseAbs().maxCoeff(), 1e-4) << "mask " << mask;
  }
}

TEST(MomOracle, SamplerVisitsModelsInProportionToLaplaceMarginals) {
  const auto t = toy(4, 40, 4);
  const SsData d(t.y, t.x, t.b);
  const SsPriorConfig p;
  const auto exact = oracle::mom_model_posterior(t.y, d.design(), p);
  ChainConfig c;
  c.iterations = 40000;
  c.burn_in = 1000;
  c.model_moves = 1;
  c.seed = 13;
  const auto chain = mom_sampler(d, p, c);
  EXPECT_LT(oracle::total_variation(model_frequencies(chain, 4), exact), 0.03);
}

namespace {

// Successive-conditional versus marginal-conditional simulation of the
// joint law of (y, parameters). Any error in a conditional shows up as a
// mismatch of prior moments.
void geweke_check(const SsPriorConfig& prior, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index n = 8, p = 2;
  const Vector x = Vector::NullaryExpr(n, [&] { return draw_normal(rng); });
  const Matrix b = Matrix::NullaryExpr(n, p, [&] { return draw_normal(rng); });
  SsData data(Vector::NullaryExpr(n, [&] { return draw_normal(rng); }), x, b);
  const GibbsSampler sampler(data, prior);

  auto stats = [](const ModelState& s) {
    return std::array<double, 5>{s.sigma2, s.beta(1), static_cast<double>(s.gamma[0]),
                                 s.xi(0) * s.xi(0), s.w};
  };
  const int mc = 200000;
  std::array<double, 5> m1{}, m2{};
  for (int i = 0; i < mc; ++i) {
    const auto v = stats(sampler.draw_prior(rng));
    for (int k = 0; k < 5; ++k) {
      m1[k] += v[k];
      m2[k] += v[k] * v[k];
    }
  }

  const int batches = 50, per_batch = 8000;
  std::array<std::vector<double>, 5> batch_means;
  ModelState s = sampler.draw_prior(rng);
  for (int bt = 0; bt < batches; ++bt) {
    std::array<double, 5> acc{};
    for (int i = 0; i < per_batch; ++i) {
      Vector theta(p + 2);
      theta << s.beta, s.xi;
      const Vector e = Vector::NullaryExpr(n, [&] { return draw_normal(rng); });
      data.set_response(data.design() * theta + std::sqrt(s.sigma2) * e);
      sampler.sweep(s, rng);
      const auto v = stats(s);
      for (int k = 0; k < 5; ++k) acc[k] += v[k];
    }
    for (int k = 0; k < 5; ++k) batch_means[k].push_back(acc[k] / per_batch);
  }
  const char* names[5] = {"sigma2", "beta_x", "gamma_1", "xi_1^2", "w"};
  for (int k = 0; k < 5; ++k) {
    const double mean_mc = m1[k] / mc;
    const double var_mc = m2[k] / mc - mean_mc * mean_mc;
    double bm = 0, bv = 0;
    for (double v : batch_means[k]) bm += v;
    bm /= batches;
    for (double v : batch_means[k]) bv += (v - bm) * (v - bm);
    bv /= (batches - 1);
    const double se = std::sqrt(var_mc / mc + bv / batches);
    if (se == 0.0) {
      EXPECT_NEAR(bm, mean_mc, 1e-12) << names[k];
      continue;
    }
    EXPECT_LT(std::abs(bm - mean_mc) / se, 4.0)
        << names[k] << ": successive " << bm << " vs prior " << mean_mc;
  }
}

}  // namespace

TEST(Geweke, FvKernelPreservesTheJointLaw) {
  SsPriorConfig p;
  p.family = PriorFamily::FV;
  p.a = 3.0;
  p.b = 2.0;
  p.c0 = 0.01;
  geweke_check(p, 21);
}

TEST(Geweke, NmigKernelWithLearnedWeightPreservesTheJointLaw) {
  SsPriorConfig p;
  p.family = PriorFamily::NMIG;
  p.a = 3.0;
  p.b = 2.0;
  p.c0 = 0.01;
  p.a_psi = 5.0;
  p.b_psi = 4.0;
  p.beta_w = true;
  geweke_check(p, 22);
}
