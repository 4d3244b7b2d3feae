#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "marpo/env.hpp"
#include "marpo/kl_clip.hpp"
#include "marpo/objective.hpp"
#include "marpo/rollout.hpp"
#include "marpo/synthetic.hpp"

namespace {

void BM_SolveBounds(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> target(1e-8, 2.0);
  std::vector<double> targets(1024);
  for (double& t : targets) t = target(rng);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(marpo::solve_bounds(targets[i++ & 1023]));
  }
}
BENCHMARK(BM_SolveBounds);

void BM_KlEstimatorExpectation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = marpo::random_distribution(n, 1);
  const auto q = marpo::random_distribution(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(marpo::kl_estimator_expectation(p, q));
}
BENCHMARK(BM_KlEstimatorExpectation)->Arg(2)->Arg(16)->Arg(256);

void BM_EvaluateObjective(benchmark::State& state) {
  marpo::NetworkConfig net;
  net.hidden_width = static_cast<std::size_t>(state.range(0));
  marpo::SyntheticBatchOptions options;
  options.obs_dim = 15;
  options.state_dim = 12;
  options.action_count = 5;
  options.samples = 256;
  options.pairs = 200;
  const marpo::ParamSet params =
      marpo::make_params(net, options.obs_dim, options.action_count, options.state_dim, 3);
  const marpo::ObjectiveBatch batch = marpo::make_synthetic_batch(params, options, 4);
  marpo::ObjectiveSettings settings;
  std::vector<double> gradient(params.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(marpo::evaluate_objective(params, batch, settings, gradient));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(options.samples));
}
BENCHMARK(BM_EvaluateObjective)->Arg(16)->Arg(64);

void BM_Collect(benchmark::State& state) {
  marpo::GridSpread env(5, 3);
  marpo::NetworkConfig net;
  const auto& spec = env.spec();
  const marpo::ParamSet params =
      marpo::make_params(net, spec.obs_dim, spec.action_count, spec.state_dim, 5);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const marpo::Rollout r = marpo::collect(env, params, 512, ++seed);
    benchmark::DoNotOptimize(r.env_steps);
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_Collect);

}  // namespace

BENCHMARK_MAIN();
