#include <benchmark/benchmark.h>

#include "mcplan/rng.hpp"
#include "mcplan/sailing.hpp"
#include "mcplan/sheep.hpp"

using namespace mcplan;

static void BM_SailingStep(benchmark::State& state) {
  Rng map_rng(3);
  const auto gen = sailing::generate_map(20, 20, 0.4, {2, 2}, {17, 17}, map_rng);
  const sailing::SailingModel model(gen.map, 0.99);
  Rng rng(7);
  auto s = sailing::sample_start_state(*gen.map, rng);
  ActionList acts;
  for (auto _ : state) {
    model.valid_actions(s, acts);
    auto out = model.step(s, acts[rng.uniform_int(acts.size())], rng);
    benchmark::DoNotOptimize(out);
    s = model.is_terminal(out.state) ? sailing::sample_start_state(*gen.map, rng)
                                     : out.state;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SailingStep);

static void BM_SheepStep(benchmark::State& state) {
  const auto maze =
      std::make_shared<sheep::Maze>(sheep::Maze::from_text(sheep::reference_maze_text()));
  const sheep::SheepModel model(maze, 0.99);
  Rng rng(7);
  auto s = sheep::sample_start_state(*maze, rng);
  for (auto _ : state) {
    const Action a = static_cast<Action>(rng.uniform_int(sheep::kNumCompoundActions));
    auto out = model.step(s, a, rng);
    benchmark::DoNotOptimize(out);
    s = model.is_terminal(out.state) ? sheep::sample_start_state(*maze, rng) : out.state;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SheepStep);
