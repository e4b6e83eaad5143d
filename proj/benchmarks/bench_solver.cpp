#include <benchmark/benchmark.h>

#include "mcplan/rng.hpp"
#include "mcplan/sailing.hpp"
#include "mcplan/value_iteration.hpp"

using namespace mcplan;

static void BM_ValueIterationSailing(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(2);
  const auto gen = sailing::generate_map(side, side, 0.3, {1, 1}, {side - 2, side - 2}, rng);
  const sailing::SailingSpace space(gen.map);
  const TabularMdp mdp = sailing::to_tabular(space, 0.99);
  for (auto _ : state) {
    SolveSettings settings;
    settings.tolerance = 1e-4;
    benchmark::DoNotOptimize(value_iteration(mdp, settings));
  }
  state.SetItemsProcessed(state.iterations() * mdp.num_entries());
}
BENCHMARK(BM_ValueIterationSailing)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_ToTabular(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(2);
  const auto gen = sailing::generate_map(side, side, 0.3, {1, 1}, {side - 2, side - 2}, rng);
  const sailing::SailingSpace space(gen.map);
  for (auto _ : state) benchmark::DoNotOptimize(sailing::to_tabular(space, 0.99));
}
BENCHMARK(BM_ToTabular)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
