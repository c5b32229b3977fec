#include "fedm/combiner.hpp"
#include "fedm/model.hpp"
#include "fedm/perturbation.hpp"
#include "fedm/simlab.hpp"

#include <benchmark/benchmark.h>

using namespace fedm;

namespace {

Vector auc_theta() { return true_theta(Example::auc); }

}  // namespace

static void BM_QuantileObjective(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const Dataset data = gen_site(Example::quantile, Setting::I, 0, n, 1);
  const auto problem = simulation_problem(Example::quantile);
  const Vector theta = true_theta(Example::quantile);
  for (auto _ : state) benchmark::DoNotOptimize(problem->objective(data, theta));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_QuantileObjective)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

static void BM_AucObjective(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const Dataset data = gen_site(Example::auc, Setting::I, 0, n, 2);
  const auto problem = simulation_problem(Example::auc);
  const Vector theta = auc_theta();
  for (auto _ : state) benchmark::DoNotOptimize(problem->objective(data, theta));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AucObjective)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oNLogN);

static void BM_AucEnumeration(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const Dataset data = gen_site(Example::auc, Setting::I, 0, n, 2);
  const auto problem = simulation_problem(Example::auc);
  const Vector theta = auc_theta();
  for (auto _ : state) benchmark::DoNotOptimize(problem->enumerate(data, theta, nullptr));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AucEnumeration)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oNSquared);

static void BM_EmpiricalV(benchmark::State& state) {
  const Dataset data = gen_site(Example::quantile, Setting::I, 0, 1000, 3);
  const auto problem = simulation_problem(Example::quantile);
  const Vector theta = true_theta(Example::quantile);
  Matrix thetas = theta.transpose().replicate(50, 1);
  thetas.array() += 0.01;
  PerturbConfig config;
  config.replicates = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(empirical_v(*problem, data, theta, thetas, config));
}
BENCHMARK(BM_EmpiricalV)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_AdaptiveLasso(benchmark::State& state) {
  const Index d = 5;
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto dim = d * static_cast<Index>(k + 1);
  Matrix m = Matrix::Random(dim, dim);
  const Matrix cov = m * m.transpose() / static_cast<double>(dim) + Matrix::Identity(dim, dim);
  const Matrix samples = draw_joint_samples(cov, defaults::q_samples, 7);
  const std::vector<double> p(k, 0.5);
  const std::vector<bool> excluded(k, false);
  for (auto _ : state) benchmark::DoNotOptimize(adaptive_lasso(samples, d, p, 0.03, excluded));
}
BENCHMARK(BM_AdaptiveLasso)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
