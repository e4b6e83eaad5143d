#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include "mcplan/sailing.hpp"
#include "mcplan/uct.hpp"
#include "mcplan/value_iteration.hpp"

using namespace mcplan;
using namespace mcplan::sailing;

namespace {

std::shared_ptr<const SailingMap> empty_map(int w, int h, Cell start, Cell goal) {
  return std::make_shared<SailingMap>(
      w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0), start, goal);
}

// Goal pocket behind a wall: SailTowardsGoal oscillates among the three
// tiles under the wall unless the wind cooperates for several steps.
constexpr const char* kPocketMapText =
    "12 8\n"
    "............\n"
    "...##G##....\n"
    "...#####....\n"
    "............\n"
    "............\n"
    "............\n"
    ".....S......\n"
    "............\n";

// Single free corridor cell whose only exit is east; an east wind leaves no
// valid action.
constexpr const char* kDeadEndMapText =
    "5 3\n"
    "#####\n"
    "#S.G#\n"
    "#####\n";

SailingState state_at(int x, int y, int boat, int wp, int wc) {
  SailingState s;
  s.x = static_cast<std::int8_t>(x);
  s.y = static_cast<std::int8_t>(y);
  s.boat = static_cast<std::int8_t>(boat);
  s.wind_prev = static_cast<std::int8_t>(wp);
  s.wind_curr = static_cast<std::int8_t>(wc);
  return s;
}

}  // namespace

TEST_CASE("direction arithmetic") {
  CHECK(opposite(N) == S);
  CHECK(opposite(NE) == SW);
  CHECK(rotate(NW, 1) == N);
  CHECK(rotate(N, -1) == NW);
}

TEST_CASE("angular cost table: 1/2/3/4 by 45-degree steps, upwind invalid") {
  CHECK(angular_cost(N, N) == 1);
  CHECK(angular_cost(NE, N) == 2);
  CHECK(angular_cost(NW, N) == 2);
  CHECK(angular_cost(E, N) == 3);
  CHECK(angular_cost(W, N) == 3);
  CHECK(angular_cost(SE, N) == 4);
  CHECK(angular_cost(SW, N) == 4);
  CHECK_THROWS_AS(angular_cost(S, N), std::invalid_argument);
}

TEST_CASE("move_cost: tack flips add the 3-minute delay") {
  // Port reach (boat E of wind N) staying port: no delay.
  CHECK(move_cost(state_at(5, 5, E, N, N), E) == 3);
  // Port to starboard: E under north wind, then W under north wind.
  CHECK(move_cost(state_at(5, 5, E, N, N), W) == 6);
  // 135 degrees off the wind plus a flip: the C_max = 7 case.
  CHECK(move_cost(state_at(5, 5, E, N, N), SW) == 7);
  // Downwind keeps the previous tack: no delay either way.
  CHECK(move_cost(state_at(5, 5, E, N, N), N) == 1);
  // Coming out of a downwind posture there is no side to flip from.
  CHECK(move_cost(state_at(5, 5, N, N, N), W) == 3);
}

TEST_CASE("valid_actions: upwind, map edge and obstacle exclusions") {
  auto map = empty_map(10, 10, {2, 2}, {7, 7});
  ActionList acts;

  SUBCASE("open interior cell: 7 directions, all but straight upwind") {
    valid_actions(state_at(5, 5, N, N, N), *map, acts);
    CHECK(acts.size() == 7);
    for (Action a : acts) CHECK(a != S);
  }
  SUBCASE("corner cell (0,0) under north wind: {E, SE}") {
    valid_actions(state_at(0, 0, N, N, N), *map, acts);
    // Off-map excludes N, NE, NW, W, SW; upwind excludes S.
    REQUIRE(acts.size() == 2);
    CHECK(acts[0] == E);
    CHECK(acts[1] == SE);
  }
  SUBCASE("dead end with an east-only exit traps under west wind") {
    // Moving against the wind is invalid, so a west wind (opposite = E)
    // removes the cell's only exit.
    const SailingMap map2 = SailingMap::from_text(kDeadEndMapText);
    valid_actions(state_at(1, 1, N, N, W), map2, acts);
    CHECK(acts.empty());
    CHECK(trapped(state_at(1, 1, N, N, W), map2));
    CHECK_FALSE(trapped(state_at(1, 1, N, N, N), map2));
  }
}

TEST_CASE("step: rewards, wind model, absorption and the trap penalty") {
  auto map = empty_map(10, 10, {2, 2}, {7, 7});
  const SailingModel model(map, 0.99);
  Rng rng(12);

  SUBCASE("downwind move with no tack change costs exactly 1") {
    const auto out = model.step(state_at(5, 5, N, N, N), N, rng);
    CHECK(out.reward == -1.0);
    CHECK(out.state.x == 5);
    CHECK(out.state.y == 4);
    CHECK(out.state.boat == N);
    CHECK(out.state.wind_prev == N);
  }
  SUBCASE("135-degree move with a tack flip costs C_max = 7") {
    const auto out = model.step(state_at(5, 5, E, N, N), SW, rng);
    CHECK(out.reward == -7.0);
  }
  SUBCASE("invalid action throws") {
    CHECK_THROWS_AS(model.step(state_at(5, 5, N, N, N), S, rng), std::invalid_argument);
    CHECK_THROWS_AS(model.step(state_at(0, 0, N, N, N), W, rng), std::invalid_argument);
  }
  SUBCASE("moving onto the goal terminates") {
    const auto out = model.step(state_at(6, 6, N, N, N), SE, rng);
    CHECK(out.state.x == 7);
    CHECK(out.state.y == 7);
    CHECK(model.is_terminal(out.state));
  }
  SUBCASE("wind moves one step at most and uniformly") {
    std::array<int, 8> counts{};
    for (int i = 0; i < 30000; ++i) {
      const auto out = model.step(state_at(5, 5, N, N, E), E, rng);
      ++counts[static_cast<std::size_t>(out.state.wind_curr)];
    }
    CHECK(counts[NE] + counts[E] + counts[SE] == 30000);
    for (int w : {NE, E, SE})
      CHECK(static_cast<double>(counts[static_cast<std::size_t>(w)]) / 30000.0 ==
            doctest::Approx(1.0 / 3.0).epsilon(0.05));
  }
  SUBCASE("rewards stay within [-7, -1] when no trap is entered") {
    Rng wander(99);
    SailingState s = sample_start_state(*map, wander);
    ActionList acts;
    for (int t = 0; t < 20000 && !model.is_terminal(s); ++t) {
      model.valid_actions(s, acts);
      const auto out = model.step(s, acts[wander.uniform_int(acts.size())], wander);
      CHECK(out.reward <= -1.0);
      CHECK(out.reward >= -7.0);
      s = out.state;
      if (model.is_terminal(s)) s = sample_start_state(*map, wander);
    }
  }
  SUBCASE("entering a trapped state adds C_max/(1-gamma)") {
    const SailingMap map2 = SailingMap::from_text(kDeadEndMapText);
    const SailingModel model2(std::make_shared<SailingMap>(map2), 0.99);
    // From (2,1) moving W into the dead end under a SW wind; the wind
    // veering to W (probability 1/3) leaves the new cell without exits.
    int trapped_entries = 0;
    Rng trng(5);
    for (int i = 0; i < 2000; ++i) {
      const auto out = model2.step(state_at(2, 1, W, SW, SW), W, trng);
      if (out.state.wind_curr == W) {
        ++trapped_entries;
        CHECK(model2.is_terminal(out.state));
        CHECK(out.reward == doctest::Approx(-2.0 - 7.0 / 0.01));
      } else {
        CHECK(out.reward == -2.0);
      }
    }
    CHECK(trapped_entries > 0);
  }
}

TEST_CASE("step and policies are deterministic under a fixed seed") {
  Rng map_rng(7);
  const auto gen = generate_map(12, 12, 0.3, {2, 2}, {9, 9}, map_rng);
  const SailingModel model(gen.map, 0.99);
  const UniformRandomPolicy<SailingState> uniform(model);
  Rng a(21), b(21);
  Rng sa(3), sb(3);
  const auto ra = run_policy(model, uniform, sample_start_state(*gen.map, sa), 300, a);
  const auto rb = run_policy(model, uniform, sample_start_state(*gen.map, sb), 300, b);
  CHECK(ra.return_value == rb.return_value);
  CHECK(ra.steps == rb.steps);
}

TEST_CASE("sail_towards_goal picks the bearing-closest valid action") {
  auto map = empty_map(20, 20, {2, 2}, {10, 10});

  SUBCASE("boat directly SW of the goal heads NE") {
    CHECK(sail_towards_goal(state_at(5, 15, N, N, N), *map) == NE);
  }
  SUBCASE("boat directly SW of the goal under SW wind: N or E by tie-break") {
    const Action a = sail_towards_goal(state_at(5, 15, N, N, SW), *map);
    CHECK((a == Action{N} || a == Action{E}));
    CHECK(a == Action{E});  // clockwise side of the blocked bearing
  }
  SUBCASE("boat due west of the goal heads E when E is valid") {
    CHECK(sail_towards_goal(state_at(3, 10, N, N, N), *map) == E);
  }
  SUBCASE("trapped state raises") {
    const SailingMap map2 = SailingMap::from_text(kDeadEndMapText);
    CHECK_THROWS_AS(sail_towards_goal(state_at(1, 1, N, N, W), map2), std::domain_error);
  }
}

TEST_CASE("stg_prior: formula, adjacency case and monotonicity") {
  auto map = empty_map(30, 30, {2, 2}, {27, 27});
  const double gamma = 0.99;

  SUBCASE("next cell on the goal: q = -(C + C_min)") {
    // From the cell NW-adjacent to the goal, sail SE downwind: cost 1, d = 0.
    const auto p = stg_prior(state_at(26, 26, SE, SE, SE), SE, *map, gamma);
    CHECK(p.visits == 1);
    CHECK(p.q == doctest::Approx(-2.0).epsilon(1e-12));
  }
  SUBCASE("distance term matches a geometric-series oracle") {
    // Chebyshev distance 25 from (2,2) to (27,27): the worst-case start.
    const int d = 25;
    double series = 0.0;
    for (int k = 0; k <= d; ++k) series += std::pow(gamma, k);
    const auto p = stg_prior(state_at(2, 2, SE, SE, SE), SE, *map, gamma);
    // Moving SE from (2,2) lands at (3,3), Chebyshev 24 from the goal.
    double series_24 = 0.0;
    for (int k = 0; k <= 24; ++k) series_24 += std::pow(gamma, k);
    CHECK(p.q == doctest::Approx(-(1.0 + series_24)).epsilon(1e-9));
    CHECK(series > series_24);  // sanity on the oracle itself
    CHECK((1.0 - std::pow(gamma, 26)) / (1.0 - gamma) ==
          doctest::Approx(series).epsilon(1e-9));
  }
  SUBCASE("equal cost, closer next cell: strictly greater q") {
    // From (10,10) with the goal to the south-east, E and W both cost 3
    // under a north wind; E shrinks the Chebyshev distance.
    const auto toward = stg_prior(state_at(10, 10, N, N, N), E, *map, gamma);
    const auto away = stg_prior(state_at(10, 10, N, N, N), W, *map, gamma);
    CHECK(toward.q > away.q);
  }
}

TEST_CASE("StgGreedyPolicy matches the prior-based greedy reference") {
  Rng map_rng(61);
  const auto gen = generate_map(12, 12, 0.3, {1, 1}, {10, 10}, map_rng);
  const StgGreedyPolicy policy(gen.map, 0.99);
  Rng rng(3);
  ActionList acts;
  for (int i = 0; i < 2000; ++i) {
    Rng start_rng(derive_seed(7, {static_cast<std::uint64_t>(i)}));
    SailingState s = sample_start_state(*gen.map, start_rng);
    const Cell cell =
        gen.map->free_cells()[start_rng.uniform_int(gen.map->free_cells().size())];
    s.x = static_cast<std::int8_t>(cell.x);
    s.y = static_cast<std::int8_t>(cell.y);
    if (valid_action_mask(s, *gen.map) == 0) continue;  // trapped corner case
    CHECK(policy.sample(s, rng) == stg_greedy(s, *gen.map, 0.99));
  }
}

TEST_CASE("generate_map: degenerate p, determinism, blockage statistics") {
  SUBCASE("p = 0 yields an empty map") {
    Rng rng(1);
    const auto gen = generate_map(10, 10, 0.0, {2, 2}, {7, 7}, rng);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) CHECK_FALSE(gen.map->blocked(x, y));
    CHECK(gen.rejections == 0);
  }
  SUBCASE("fixed seed reproduces the map") {
    Rng a(77), b(77);
    const auto ga = generate_map(15, 15, 0.4, {2, 2}, {12, 12}, a);
    const auto gb = generate_map(15, 15, 0.4, {2, 2}, {12, 12}, b);
    CHECK(ga.map->to_text() == gb.map->to_text());
    CHECK(ga.rejections == gb.rejections);
  }
  SUBCASE("interior blockage fraction concentrates near p") {
    Rng rng(123);
    std::int64_t blocked = 0, interior = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto gen = generate_map(30, 30, 0.4, {2, 2}, {27, 27}, rng);
      for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 30; ++x) {
          if ((Cell{x, y} == Cell{2, 2}) || (Cell{x, y} == Cell{27, 27})) continue;
          ++interior;
          blocked += gen.map->blocked(x, y) ? 1 : 0;
        }
    }
    // Acceptance biases the fraction slightly low: connected maps have
    // marginally fewer obstacles.
    const double fraction = static_cast<double>(blocked) / static_cast<double>(interior);
    CHECK(fraction == doctest::Approx(0.4).epsilon(0.05));
    CHECK(fraction < 0.42);
    CHECK(fraction > 0.38);
  }
}

TEST_CASE("map text round-trips bit-exactly") {
  Rng rng(55);
  const auto gen = generate_map(14, 9, 0.35, {2, 2}, {11, 6}, rng);
  const std::string text = gen.map->to_text();
  const SailingMap parsed = SailingMap::from_text(text);
  CHECK(parsed.to_text() == text);
  const std::string path = "test_sailing_roundtrip.map";
  gen.map->save(path);
  const SailingMap loaded = SailingMap::load(path);
  CHECK(loaded.to_text() == text);
  std::remove(path.c_str());
}

TEST_CASE("to_tabular: counts, terminal rows and sampling agreement") {
  Rng rng(31);
  const auto gen = generate_map(8, 8, 0.25, {1, 1}, {6, 6}, rng);
  const SailingSpace space(gen.map);
  const TabularMdp mdp = to_tabular(space, 0.99);
  mdp.validate();

  CHECK(mdp.num_states() == gen.map->num_free_cells() * 512);
  CHECK(mdp.num_states() <= 8 * 8 * 512);

  SUBCASE("goal states are terminal and edgeless") {
    for (int b = 0; b < 8; ++b)
      for (int wp = 0; wp < 8; ++wp)
        for (int wc = 0; wc < 8; ++wc) {
          const auto idx = space.index(state_at(6, 6, b, wp, wc));
          CHECK(mdp.terminal(idx));
          for (Action a = 0; a < 8; ++a) CHECK_FALSE(mdp.action_valid(idx, a));
        }
  }

  SUBCASE("generative sampling matches the transition table within 3 sigma") {
    const SailingModel model(gen.map, 0.99);
    // Any free non-goal interior cell works; take the first.
    SailingState s = state_at(1, 1, E, N, N);
    for (const Cell& c : gen.map->free_cells()) {
      if (c == gen.map->goal()) continue;
      s.x = static_cast<std::int8_t>(c.x);
      s.y = static_cast<std::int8_t>(c.y);
      if (!trapped(s, *gen.map)) break;
    }
    const auto idx = space.index(s);
    ActionList acts;
    model.valid_actions(s, acts);
    REQUIRE(!acts.empty());
    const Action a = acts[0];
    constexpr int kSamples = 100000;
    std::unordered_map<std::uint32_t, int> freq;
    Rng srng(9);
    double expected_reward = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const auto out = model.step(s, a, srng);
      ++freq[out.state.packed()];
      expected_reward = out.reward;
    }
    int matched = 0;
    for (auto e = mdp.row_begin(idx, a); e < mdp.row_end(idx, a); ++e) {
      const auto j = static_cast<std::size_t>(e);
      const SailingState next = space.state(mdp.next()[j]);
      const double p = mdp.prob()[j];
      const double n = static_cast<double>(freq[next.packed()]);
      const double sigma = std::sqrt(kSamples * p * (1.0 - p));
      CHECK(std::abs(n - kSamples * p) <= 3.0 * sigma);
      CHECK(mdp.reward()[j] == expected_reward);
      ++matched;
    }
    CHECK(matched == 3);
  }
}

TEST_CASE("wind direction chain mixes to the uniform distribution") {
  auto map = empty_map(40, 40, {1, 1}, {38, 38});
  const SailingModel model(map, 0.99);
  Rng rng(2718);
  SailingState s = state_at(20, 20, N, N, N);
  std::array<std::int64_t, 8> counts{};
  constexpr int kSteps = 1000000;
  constexpr int kThin = 64;  // the chain is autocorrelated; thin before chi^2
  ActionList acts;
  std::int64_t samples = 0;
  for (int t = 0; t < kSteps; ++t) {
    model.valid_actions(s, acts);
    auto out = model.step(s, acts[rng.uniform_int(acts.size())], rng);
    s = out.state;
    s.x = 20;
    s.y = 20;  // keep the boat away from walls; only the wind matters here
    if (t % kThin == 0) {
      ++counts[static_cast<std::size_t>(s.wind_curr)];
      ++samples;
    }
  }
  const double expected = static_cast<double>(samples) / 8.0;
  double chi2 = 0.0;
  for (auto c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 18.475);  // chi-square, 7 dof, 1% level
}

TEST_CASE("SailTowardsGoal oscillates in the goal pocket for most winds") {
  const auto map = std::make_shared<SailingMap>(SailingMap::from_text(kPocketMapText));
  const SailingModel model(map, 0.99);
  const SailTowardsGoalPolicy stg(map);
  int failures = 0;
  constexpr int kSeeds = 200;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    Rng start_rng(derive_seed(seed, {1}));
    const auto result =
        run_policy(model, stg, sample_start_state(*map, start_rng), 300, rng);
    if (!model.is_terminal(result.final_state) ||
        result.final_state.x != map->goal().x || result.final_state.y != map->goal().y)
      ++failures;
  }
  CHECK(failures > kSeeds / 2);

  // The pocket is nevertheless solvable: the greedy policy reaches the goal.
  const SailingSpace space(map);
  const SolveResult solved = value_iteration(to_tabular(space, 0.99));
  auto greedy = std::make_shared<GreedyTablePolicy>(extract_greedy(solved));
  const IndexedPolicy<SailingState> optimal(greedy, space.indexer());
  int optimal_successes = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    Rng start_rng(derive_seed(seed, {1}));
    const auto result =
        run_policy(model, optimal, sample_start_state(*map, start_rng), 300, rng);
    if (model.is_terminal(result.final_state) && result.final_state.x == map->goal().x &&
        result.final_state.y == map->goal().y)
      ++optimal_successes;
  }
  CHECK(optimal_successes > 45);
}

TEST_CASE("on an empty map SailTowardsGoal is near-optimal") {
  const auto map = empty_map(8, 8, {1, 1}, {6, 6});
  const SailingModel model(map, 0.99);
  const SailingSpace space(map);
  const SolveResult solved = value_iteration(to_tabular(space, 0.99));
  const SailTowardsGoalPolicy stg(map);

  double stg_total = 0.0, vstar_total = 0.0;
  constexpr int kEpisodes = 1500;
  for (std::uint64_t seed = 0; seed < kEpisodes; ++seed) {
    Rng start_rng(derive_seed(seed, {2}));
    const SailingState start = sample_start_state(*map, start_rng);
    Rng rng(seed);
    stg_total += run_policy(model, stg, start, 300, rng).return_value;
    vstar_total += solved.v[static_cast<std::size_t>(space.index(start))];
  }
  const double stg_cost = -stg_total / kEpisodes;
  const double optimal_cost = -vstar_total / kEpisodes;
  CHECK(stg_cost <= optimal_cost * 1.2);
  CHECK(stg_cost >= optimal_cost);
}

TEST_CASE("oracle consistency: simulated greedy returns track V*") {
  Rng map_rng(41);
  const auto gen = generate_map(6, 6, 0.2, {1, 1}, {4, 4}, map_rng);
  const SailingModel model(gen.map, 0.99);
  const SailingSpace space(gen.map);
  const SolveResult solved = value_iteration(to_tabular(space, 0.99));
  auto greedy = std::make_shared<GreedyTablePolicy>(extract_greedy(solved));
  const IndexedPolicy<SailingState> optimal(greedy, space.indexer());

  Rng start_rng(4);
  const SailingState start = sample_start_state(*gen.map, start_rng);
  const double v = solved.v[static_cast<std::size_t>(space.index(start))];
  double total = 0.0;
  constexpr int kEpisodes = 1200;
  constexpr int kHorizon = 300;
  for (std::uint64_t seed = 0; seed < kEpisodes; ++seed) {
    Rng rng(derive_seed(seed, {3}));
    total += run_policy(model, optimal, start, kHorizon, rng).return_value;
  }
  const double mean = total / kEpisodes;
  const double slack =
      std::abs(v) * 0.05 + std::pow(0.99, kHorizon) * 7.0 / (1.0 - 0.99);
  CHECK(std::abs(mean - v) <= slack);
}

TEST_CASE("Bellman residuals decrease monotonically on a sailing map") {
  Rng map_rng(8);
  const auto gen = generate_map(7, 7, 0.25, {1, 1}, {5, 5}, map_rng);
  SolveSettings settings;
  settings.record_residuals = true;
  const SolveResult solved = value_iteration(to_tabular(SailingSpace(gen.map), 0.99), settings);
  REQUIRE(solved.residual_history.size() >= 2);
  for (std::size_t i = 1; i < solved.residual_history.size(); ++i)
    CHECK(solved.residual_history[i] <= solved.residual_history[i - 1] + 1e-9);
}

TEST_CASE("UCT search on a small empty map is near the exact oracle") {
  const auto map = empty_map(5, 5, {1, 1}, {3, 3});
  const SailingModel model(map, 0.99);
  const SailingSpace space(map);
  const SolveResult solved = value_iteration(to_tabular(space, 0.99));

  SearchConfig<SailingState> cfg;
  cfg.exploration_constant = 7.0 / (1.0 - 0.99);
  cfg.horizon = 300;
  cfg.budget = 20000;

  const SailingState start = state_at(1, 1, E, N, N);
  const auto idx = space.index(start);
  UctSearch<SailingState> search(model, cfg, start, Rng(17));
  const auto diag = search.search();
  const double v = solved.v[static_cast<std::size_t>(idx)];
  const double q_recommended = solved.q_at(idx, diag.recommended);
  CHECK(v - q_recommended <= 0.05 * std::abs(v));
}

TEST_CASE("plan_episode with a healthy budget tracks the Optimal agent") {
  const auto map = empty_map(10, 10, {2, 2}, {7, 7});
  const SailingModel model(map, 0.99);
  const SailingSpace space(map);
  const SolveResult solved = value_iteration(to_tabular(space, 0.99));
  auto greedy = std::make_shared<GreedyTablePolicy>(extract_greedy(solved));
  const IndexedPolicy<SailingState> optimal(greedy, space.indexer());

  SearchConfig<SailingState> cfg;
  cfg.exploration_constant = 700.0;
  cfg.horizon = 60;
  cfg.budget = 4000;

  double uct_total = 0.0, opt_total = 0.0;
  constexpr int kTrials = 100;
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    Rng start_rng(derive_seed(t, {4}));
    const SailingState start = sample_start_state(*map, start_rng);
    uct_total += plan_episode(model, start, cfg, 300, Rng(derive_seed(t, {5}))).return_value;
    Rng orng(derive_seed(t, {6}));
    opt_total += run_policy(model, optimal, start, 300, orng).return_value;
  }
  const double uct_cost = -uct_total / kTrials;
  const double opt_cost = -opt_total / kTrials;
  CHECK(uct_cost <= opt_cost * 1.10);
}
