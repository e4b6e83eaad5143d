#include <benchmark/benchmark.h>

#include "mcplan/rng.hpp"
#include "mcplan/sailing.hpp"
#include "mcplan/uct.hpp"

using namespace mcplan;
using namespace mcplan::sailing;

namespace {

std::shared_ptr<const SailingMap> bench_map() {
  static std::shared_ptr<const SailingMap> map = [] {
    Rng rng(3);
    return generate_map(20, 20, 0.4, {2, 2}, {17, 17}, rng).map;
  }();
  return map;
}

}  // namespace

static void BM_UctSimulate(benchmark::State& state) {
  const auto map = bench_map();
  const SailingModel model(map, 0.99);
  SearchConfig<SailingState> cfg;
  cfg.exploration_constant = 700.0;
  cfg.horizon = 300;
  cfg.budget = static_cast<int>(state.range(0));
  Rng start_rng(4);
  const SailingState start = sample_start_state(*map, start_rng);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    UctSearch<SailingState> search(model, cfg, start, Rng(seed++));
    for (int i = 0; i < cfg.budget; ++i) benchmark::DoNotOptimize(search.simulate());
  }
  state.SetItemsProcessed(state.iterations() * cfg.budget);
}
BENCHMARK(BM_UctSimulate)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_UctSimulateAux(benchmark::State& state) {
  const auto map = bench_map();
  const SailingModel model(map, 0.99);
  const SailTowardsGoalPolicy stg(map);
  SearchConfig<SailingState> cfg;
  cfg.exploration_constant = 700.0;
  cfg.horizon = 300;
  cfg.budget = static_cast<int>(state.range(0));
  cfg.aux_policy = &stg;
  Rng start_rng(4);
  const SailingState start = sample_start_state(*map, start_rng);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    UctSearch<SailingState> search(model, cfg, start, Rng(seed++));
    for (int i = 0; i < cfg.budget; ++i) benchmark::DoNotOptimize(search.simulate());
  }
  state.SetItemsProcessed(state.iterations() * cfg.budget);
}
BENCHMARK(BM_UctSimulateAux)->Arg(1000)->Unit(benchmark::kMillisecond);
