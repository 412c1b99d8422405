// Serial reference against the OpenMP kernels.

#include <benchmark/benchmark.h>

#include "resamplex/coverage.hpp"
#include "resamplex/estimator.hpp"
#include "resamplex/sample.hpp"
#include "resamplex/scenarios.hpp"
#include "resamplex/variance.hpp"

using namespace resamplex;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_simple_estimate(benchmark::State& state) {
  const auto s = load_scenario("hier-query");
  const auto tree = with_threshold(s.tree, 10.0);
  const auto pools = draw_pools(s.laws, std::vector<std::size_t>(6, 100), 1);
  for (auto _ : state) benchmark::DoNotOptimize(simple_estimate(pools, tree, 1'000'000, 7, mode(state)).value);
  label(state);
}

void BM_hierarchical_estimate(benchmark::State& state) {
  const auto s = load_scenario("hier-query");
  const auto tree = s.tree.with_internal_sizes(200'000);
  const auto pools = draw_pools(s.laws, std::vector<std::size_t>(6, 100), 1);
  for (auto _ : state) benchmark::DoNotOptimize(hierarchical_estimate(pools, tree, 7, mode(state)).value);
  label(state);
}

void BM_coverage_simulation(benchmark::State& state) {
  const CoverageConfig config{{4, 4, 4}, 0.9, 10, RankFunctional::min_selection};
  for (auto _ : state) benchmark::DoNotOptimize(coverage_simulation_mc(config, 100'000, 7, mode(state)).coverage);
  label(state);
}

void BM_mixed_moment_mc(benchmark::State& state) {
  const auto s = load_scenario("hier-query");
  const auto tree = with_threshold(s.tree, 10.0);
  const OmegaPair omega{0b000101};
  for (auto _ : state)
    benchmark::DoNotOptimize(conditional_mixed_moment_mc(tree, s.laws, omega, 500'000, 7, mode(state)).value);
  label(state);
}

}  // namespace

BENCHMARK(BM_simple_estimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_hierarchical_estimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_coverage_simulation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_mixed_moment_mc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
