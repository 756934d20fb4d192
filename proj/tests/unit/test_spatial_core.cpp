#include <cmath>

#include <gtest/gtest.h>

#include <spatconf/errors.hpp>
#include <spatconf/spatial_core.hpp>

#include "oracles/bordered.hpp"
#include "oracles/confounding.hpp"
#include "test_util.hpp"

using namespace spatconf;

TEST(Sites, RejectDuplicateLocations) {
  EXPECT_THROW(SiteSet({{0.1, 0.2}, {0.3, 0.4}, {0.1, 0.2}}), DuplicateSiteError);
}

TEST(Sites, RejectNonFiniteCoordinates) {
  EXPECT_THROW(SiteSet({{0.1, NAN}}), NumericalError);
  EXPECT_THROW(SiteSet({{INFINITY, 0.0}}), NumericalError);
}

TEST(Sites, CoordinatesMatrix) {
  const SiteSet s({{0.1, 0.2}, {0.3, 0.4}});
  const Matrix c = s.coordinates();
  EXPECT_EQ(c.rows(), 2);
  EXPECT_DOUBLE_EQ(c(1, 0), 0.3);
  EXPECT_DOUBLE_EQ(c(1, 1), 0.4);
}

TEST(Distance, MetricPropertiesOnRandomTriples) {
  const auto s = testutil::uniform_sites(60, 11);
  for (std::size_t i = 0; i + 2 < s.size(); i += 3) {
    const double ab = distance(s[i], s[i + 1]);
    EXPECT_DOUBLE_EQ(ab, distance(s[i + 1], s[i]));
    EXPECT_LE(ab, distance(s[i], s[i + 2]) + distance(s[i + 2], s[i + 1]) + 1e-15);
    EXPECT_EQ(distance(s[i], s[i]), 0.0);
  }
}

TEST(ExpCorrelation, ValuesAndPracticalRange) {
  const ExpCorrelation r(0.2);
  EXPECT_DOUBLE_EQ(r(0.0), 1.0);
  EXPECT_NEAR(r(0.2), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(r(r.practical_range()), 0.05, 1e-12);
  // practical range is roughly three ranges
  EXPECT_NEAR(r.practical_range() / 0.2, 3.0, 0.01);
}

TEST(ExpCorrelation, RejectsNonPositiveRange) {
  EXPECT_THROW(ExpCorrelation(0.0), UsageError);
  EXPECT_THROW(ExpCorrelation(-1.0), UsageError);
  EXPECT_THROW(ExpCorrelation(NAN), UsageError);
}

TEST(Correlation, MatchesDirectLoopsAndIsPositiveDefinite) {
  const auto s = testutil::uniform_sites(80, 3);
  const Matrix r = correlation_matrix(s, ExpCorrelation(0.3));
  EXPECT_LT((r - oracle::exp_correlation(s, 0.3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(r.isApprox(r.transpose()));
  EXPECT_TRUE((r.diagonal().array() == 1.0).all());
  Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

class SqrtTest : public ::testing::TestWithParam<SqrtMethod> {};

TEST_P(SqrtTest, FactorReproducesMatrixAndInverse) {
  const auto s = testutil::uniform_sites(70, 5);
  const Matrix r = correlation_matrix(s, ExpCorrelation(0.1));
  const auto pair = matrix_sqrt_pair(r, GetParam());
  EXPECT_EQ(pair.jitter_used, 0.0);
  EXPECT_LT((pair.root * pair.root.transpose() - r).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((pair.inverse_root * pair.root - Matrix::Identity(70, 70)).cwiseAbs().maxCoeff(), 1e-8);
  if (GetParam() == SqrtMethod::SymmetricEigen) {
    EXPECT_LT((pair.root - pair.root.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  } else {
    EXPECT_TRUE(pair.root.isLowerTriangular());
  }
}

TEST_P(SqrtTest, SingularMatrixNeedsBoundedJitter) {
  Matrix r(3, 3);
  r << 1, 1, 0, 1, 1, 0, 0, 0, 1;
  const auto pair = matrix_sqrt_pair(r, GetParam());
  EXPECT_GT(pair.jitter_used, 0.0);
  EXPECT_LE(pair.jitter_used, JitterPolicy{}.max);
  EXPECT_LT((pair.root * pair.root.transpose() - r).cwiseAbs().maxCoeff(), 1e-5);
}

TEST_P(SqrtTest, IndefiniteMatrixFails) {
  Matrix r(2, 2);
  r << 1, 2, 2, 1;
  EXPECT_THROW(matrix_sqrt(r, GetParam()), FactorizationError);
}

INSTANTIATE_TEST_SUITE_P(Methods, SqrtTest,
                         ::testing::Values(SqrtMethod::SymmetricEigen, SqrtMethod::Cholesky));

TEST(TpsKernel, ValuesAndMatrix) {
  EXPECT_EQ(tps_kernel_distance(0.0), 0.0);
  EXPECT_EQ(tps_kernel_distance(1.0), 0.0);
  EXPECT_LT(tps_kernel_distance(0.5), 0.0);
  const auto s = testutil::uniform_sites(40, 8);
  EXPECT_LT((tps_kernel_matrix(s) - oracle::tps_kernel(s)).cwiseAbs().maxCoeff(), 1e-15);
}
