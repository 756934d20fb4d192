#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include <spatconf/rng.hpp>

using namespace spatconf;

TEST(DeriveSeed, DeterministicAndCounterSensitive) {
  EXPECT_EQ(derive_seed(7, {2, 3, 4}), derive_seed(7, {2, 3, 4}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 5; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {2, a, b}));
  }
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(7, {1, 0}));
}

namespace {

template <class F>
std::pair<double, double> moments(F draw, int n) {
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, s2 / n - m * m};
}

}  // namespace

TEST(Draws, NormalUniformGammaMoments) {
  Rng rng(42);
  const int n = 200000;
  auto [mn, vn] = moments([&] { return draw_normal(rng); }, n);
  EXPECT_NEAR(mn, 0.0, 5 * std::sqrt(1.0 / n));
  EXPECT_NEAR(vn, 1.0, 0.02);
  auto [mu, vu] = moments([&] { return draw_uniform(rng); }, n);
  EXPECT_NEAR(mu, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(vu, 1.0 / 12, 0.002);
  auto [mg, vg] = moments([&] { return draw_gamma(2.5, rng); }, n);
  EXPECT_NEAR(mg, 2.5, 5 * std::sqrt(2.5 / n));
  EXPECT_NEAR(vg, 2.5, 0.06);
}

TEST(Draws, InverseGammaMean) {
  Rng rng(43);
  const int n = 200000;
  // shape 5, scale 2: mean 2 / 4, variance 4 / (16 * 3)
  auto [m, v] = moments([&] { return draw_inverse_gamma(5.0, 2.0, rng); }, n);
  EXPECT_NEAR(m, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(v, 1.0 / 12, 0.005);
}

TEST(Draws, UniformStaysInsideUnitInterval) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = draw_uniform(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
