#include <cmath>

#include <gtest/gtest.h>

#include <spatconf/bias.hpp>
#include <spatconf/errors.hpp>
#include <spatconf/rng.hpp>

#include "oracles/confounding.hpp"
#include "test_util.hpp"

using namespace spatconf;

namespace {

struct Instance {
  SiteSet sites;
  ConfoundingScenario scenario;
  FieldFactors factors;
  Vector x;
};

Instance random_instance(std::uint64_t seed, std::size_t n = 70) {
  Rng rng(seed);
  Instance in;
  in.sites = testutil::uniform_sites(n, seed);
  in.scenario.phi_x = 0.03 + 0.5 * draw_uniform(rng);
  in.scenario.phi_w = 0.03 + 0.5 * draw_uniform(rng);
  in.scenario.delta = -0.9 + 1.8 * draw_uniform(rng);
  in.scenario.sigma2_w = 0.2 + 2.0 * draw_uniform(rng);
  in.scenario.sigma2_x = 0.2 + 2.0 * draw_uniform(rng);
  in.factors = field_factors(in.scenario, in.sites);
  in.x = sample_exposure(in.scenario, in.factors, seed + 100);
  return in;
}

Matrix with_intercept(const Vector& x, const Matrix& b) {
  Matrix d(x.size(), 2 + b.cols());
  d.col(0).setOnes();
  d.col(1) = x;
  d.rightCols(b.cols()) = b;
  return d;
}

}  // namespace

TEST(DeltaOls, EqualsProjectionOfConfounderMean) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = random_instance(seed);
    const Vector mu = oracle::confounder_mean(in.scenario, in.sites, in.x);
    const Vector ref = oracle::projection_coefficients(with_intercept(in.x, Matrix(70, 0)), mu);
    EXPECT_LT((delta_ols(in.scenario, in.factors, in.x) - ref).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(DeltaGls, MatchesWeightedProjection) {
  const auto in = random_instance(8);
  const Vector mu = oracle::confounder_mean(in.scenario, in.sites, in.x);
  Matrix sigma = in.scenario.sigma2_w * (1 - in.scenario.delta * in.scenario.delta) *
                 oracle::exp_correlation(in.sites, in.scenario.phi_w);
  sigma.diagonal().array() += in.scenario.sigma2_eps;
  const Matrix si = sigma.inverse();
  const Matrix x = with_intercept(in.x, Matrix(70, 0));
  const Vector ref = (x.transpose() * si * x).inverse() * (x.transpose() * si * mu);
  EXPECT_LT((delta_gls(in.scenario, in.factors, in.x) - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DX, HatMatrixIdentityOnRandomInstances) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const auto in = random_instance(seed);
    const auto pb = principal_kriging_basis(in.sites, NullSpaceType::Type1);
    const Vector mu = oracle::confounder_mean(in.scenario, in.sites, in.x);
    for (Eigen::Index k : {1, 4, 15, 40}) {
      const Matrix b = pb.B.leftCols(k);
      const Vector adj = oracle::projection_coefficients(with_intercept(in.x, b), mu).head(2);
      const auto report = bias_report(in.scenario, in.factors, in.x, b, NullSpaceType::Type1);
      EXPECT_LT((report.delta_adj - adj).cwiseAbs().maxCoeff(), 1e-8) << seed << " k=" << k;
      EXPECT_EQ(report.k_used, static_cast<std::size_t>(k));
    }
  }
}

TEST(DX, DegenerateCasesVanish) {
  auto in = random_instance(3);
  const auto t3 = principal_kriging_basis(in.sites, NullSpaceType::Type3, in.x);
  EXPECT_LT(d_x(in.scenario, in.factors, in.x, t3.B.leftCols(30))(1), 1e-10);

  in.scenario.phi_w = in.scenario.phi_x;
  in.factors = field_factors(in.scenario, in.sites);
  const auto t1 = principal_kriging_basis(in.sites, NullSpaceType::Type1);
  EXPECT_LT(std::abs(d_x(in.scenario, in.factors, in.x, t1.B.leftCols(20))(1)), 1e-10);

  auto z = random_instance(4);
  z.scenario.delta = 0.0;
  EXPECT_EQ(delta_ols(z.scenario, z.factors, z.x)(1), 0.0);
  EXPECT_EQ(delta_gls(z.scenario, z.factors, z.x)(1), 0.0);
  EXPECT_EQ(d_x(z.scenario, z.factors, z.x, t1.B.leftCols(5))(1), 0.0);
}

TEST(DX, EmptyBasisAndRankDeficiency) {
  const auto in = random_instance(5);
  EXPECT_EQ(d_x(in.scenario, in.factors, in.x, Matrix(70, 0)), Vector::Zero(2));
  Matrix b(70, 2);
  b.col(0) = in.x;
  b.col(1) = Vector::Ones(70);
  EXPECT_THROW(d_x(in.scenario, in.factors, in.x, b), RankError);
  EXPECT_THROW(delta_ols(in.scenario, in.factors, Vector::Constant(70, 2.0)), RankError);
}

TEST(BiasCurve, EqualsPrefixEvaluations) {
  const auto in = random_instance(6, 60);
  const auto pb = principal_kriging_basis(in.sites, NullSpaceType::Type1);
  const auto curve = bias_curve(in.scenario, in.factors, in.x, pb);
  ASSERT_EQ(curve.k.size(), 57u);
  EXPECT_EQ(curve.k.front(), 1u);
  for (std::size_t i = 0; i < curve.k.size(); i += 8) {
    const auto k = static_cast<Eigen::Index>(curve.k[i]);
    EXPECT_NEAR(curve.d_x[i], d_x(in.scenario, in.factors, in.x, pb.B.leftCols(k))(1), 1e-9);
  }
  EXPECT_THROW(bias_curve(in.scenario, in.factors, in.x, pb, 59), UsageError);
}

TEST(BiasCurve, SignsForSmoothConfounder) {
  // Exposure rougher than the confounder: the basis mitigates the bias.
  const auto sites = sample_grid_sites(200, 64, derive_seed(1, {0}));
  ConfoundingScenario s;
  s.phi_x = 0.05;
  s.phi_w = 0.5;
  const auto f = field_factors(s, sites);
  const Vector x = sample_exposure(s, f, derive_seed(1, {1, 0}));
  const auto curve = bias_curve(s, f, x, principal_kriging_basis(sites, NullSpaceType::Type1), 50);
  for (double d : curve.d_x) EXPECT_LT(d, 0.0);
}

TEST(PosteriorMean, MatchesDenseInverse) {
  Rng rng(3);
  const Matrix a = Matrix::NullaryExpr(40, 6, [&] { return draw_normal(rng); });
  const Vector y = Vector::NullaryExpr(40, [&] { return draw_normal(rng); });
  Vector prec(6);
  prec << 0, 0, 1, 4, 0.5, 100;
  const Vector got = posterior_mean_coefficients(a, y, prec, 0.7);
  EXPECT_LT((got - oracle::posterior_mean_dense(a, y, prec, 0.7)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DxStar, MatchesPosteriorMinusOls) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Vector x = Vector::NullaryExpr(50, [&] { return draw_normal(rng); });
    const Matrix b = Matrix::NullaryExpr(50, 7, [&] { return draw_normal(rng); });
    const Vector y = Vector::NullaryExpr(50, [&] { return draw_normal(rng); });
    const Vector v = Vector::NullaryExpr(7, [&] { return 0.01 + draw_uniform(rng); });
    const double s2 = 0.3 + draw_uniform(rng);
    const Matrix a = with_intercept(x, b);
    Vector prec(9);
    prec << 0, 0, v.cwiseInverse();
    const Vector post = oracle::posterior_mean_dense(a, y, prec, s2).head(2);
    const Vector ols = oracle::projection_coefficients(with_intercept(x, Matrix(50, 0)), y);
    EXPECT_LT((d_x_star(y, x, b, v, s2) - (post - ols)).cwiseAbs().maxCoeff(), 1e-9);
  }
}
