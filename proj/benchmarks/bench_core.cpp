#include <benchmark/benchmark.h>

#include <spatconf/bias.hpp>
#include <spatconf/principal_basis.hpp>
#include <spatconf/rng.hpp>
#include <spatconf/simulator.hpp>
#include <spatconf/ss_regression.hpp>

using namespace spatconf;

namespace {

SiteSet sites_for(benchmark::State& state) {
  return sample_grid_sites(static_cast<std::size_t>(state.range(0)), 64, 1);
}

void BM_PrincipalBasis(benchmark::State& state) {
  const auto sites = sites_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(principal_kriging_basis(sites, NullSpaceType::Type1));
}
BENCHMARK(BM_PrincipalBasis)->Arg(100)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_TprsBasis(benchmark::State& state) {
  const auto sites = sites_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(tprs_basis(sites, 150));
}
BENCHMARK(BM_TprsBasis)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_BiasCurve(benchmark::State& state) {
  const auto sites = sites_for(state);
  ConfoundingScenario s;
  s.phi_x = 0.05;
  s.phi_w = 0.5;
  const auto f = field_factors(s, sites);
  const Vector x = sample_exposure(s, f, 2);
  const auto pb = principal_kriging_basis(sites, NullSpaceType::Type1);
  for (auto _ : state) benchmark::DoNotOptimize(bias_curve(s, f, x, pb));
}
BENCHMARK(BM_BiasCurve)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_MomLaplace(benchmark::State& state) {
  const auto n = state.range(0);
  Rng rng(3);
  const Vector x = Vector::NullaryExpr(n, [&] { return draw_normal(rng); });
  const Matrix b = Matrix::NullaryExpr(n, 20, [&] { return draw_normal(rng); });
  const Vector y = x + 0.5 * b.col(0) + Vector::NullaryExpr(n, [&] { return draw_normal(rng); });
  const SsData data(y, x, b);
  const MomModelSpace space(data, SsPriorConfig{});
  const std::vector<int> model = {0, 3, 7};
  for (auto _ : state) benchmark::DoNotOptimize(space.laplace(model));
}
BENCHMARK(BM_MomLaplace)->Arg(200)->Arg(500)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
