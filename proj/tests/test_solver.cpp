#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mcplan/tabular.hpp"
#include "mcplan/value_iteration.hpp"
#include "toy_mdps.hpp"

using namespace mcplan;
using namespace mcplan::testing;

TEST_CASE("single terminal state solves immediately") {
  TabularMdpBuilder b(1, 1, 0.9);
  b.terminal(0);
  const TabularMdp mdp = b.build();
  const SolveResult r = value_iteration(mdp);
  CHECK(r.v[0] == 0.0);
  CHECK(r.iterations == 1);
  CHECK(r.greedy[0] == -1);
}

TEST_CASE("two-state chain: V*(s0) = 1") {
  const SolveResult r = value_iteration(chain2());
  CHECK(r.v[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.v[1] == 0.0);
  CHECK(r.greedy[0] == 0);
}

TEST_CASE("three-step corridor: V*(start) = gamma^2") {
  const SolveResult r = value_iteration(corridor3());
  CHECK(r.v[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(r.v[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.v[2] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Q*/V* consistency on the fixtures") {
  for (const auto& [name, mdp] : convergence_fixtures()) {
    CAPTURE(name);
    const SolveResult r = value_iteration(mdp);
    for (StateIndex s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      double best = -1e300;
      for (Action a = 0; a < mdp.num_actions(); ++a) {
        if (!mdp.action_valid(s, a)) continue;
        best = std::max(best, r.q_at(s, a));
      }
      CHECK(std::abs(best - r.v[static_cast<std::size_t>(s)]) <= 1e-6);
    }
  }
}

TEST_CASE("non-convergence is reported") {
  SolveSettings s;
  s.tolerance = 1e-12;
  s.max_iterations = 2;
  CHECK_THROWS_AS(value_iteration(slippery_grid(), s), std::runtime_error);
}

TEST_CASE("extract_greedy prefers the unique argmax and breaks ties low") {
  // Two arms with Q 3 and 7 at s0; two equal arms at s1.
  TabularMdpBuilder b(3, 2, 0.9);
  b.arc(0, 0, 2, 3.0).arc(0, 1, 2, 7.0);
  b.arc(1, 0, 2, 5.0).arc(1, 1, 2, 5.0);
  b.terminal(2);
  const SolveResult r = value_iteration(b.build());
  const GreedyTablePolicy policy = extract_greedy(r);
  Rng rng(1);
  CHECK(policy.sample(0, rng) == 1);
  CHECK(policy.sample(1, rng) == 0);  // tie: lowest action index
  ActionDistribution dist;
  policy.action_distribution(0, dist);
  REQUIRE(dist.size() == 1);
  CHECK(dist[0].action == 1);
  CHECK(dist[0].prob == 1.0);
}

TEST_CASE("extract_greedy on the two-state chain") {
  const SolveResult r = value_iteration(chain2());
  const GreedyTablePolicy policy = extract_greedy(r);
  Rng rng(1);
  CHECK(policy.sample(0, rng) == 0);
}

TEST_CASE("stochastic_optimal mixes the greedy action with a uniform share") {
  const TabularMdp mdp = slippery_grid();
  const SolveResult r = value_iteration(mdp);

  SUBCASE("p = 1 collapses to the greedy support") {
    const auto policy = stochastic_optimal(r, 1.0, mdp);
    ActionDistribution dist;
    policy.action_distribution(0, dist);
    REQUIRE(dist.size() == 1);
    CHECK(dist[0].action == r.greedy[0]);
  }
  SUBCASE("p = 0 is uniform over valid actions") {
    const auto policy = stochastic_optimal(r, 0.0, mdp);
    ActionDistribution dist;
    policy.action_distribution(0, dist);
    REQUIRE(dist.size() == 4);
    for (const auto& ap : dist) CHECK(ap.prob == doctest::Approx(0.25));
  }
  SUBCASE("p = 0.2 with four actions: 0.4 on greedy, 0.2 elsewhere") {
    const auto policy = stochastic_optimal(r, 0.2, mdp);
    ActionDistribution dist;
    policy.action_distribution(0, dist);
    REQUIRE(dist.size() == 4);
    double total = 0.0;
    for (const auto& ap : dist) {
      total += ap.prob;
      if (ap.action == r.greedy[0]) CHECK(ap.prob == doctest::Approx(0.4));
      else CHECK(ap.prob == doctest::Approx(0.2));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("sampling matches the distribution") {
    const auto policy = stochastic_optimal(r, 0.2, mdp);
    Rng rng(17);
    std::array<int, 4> counts{};
    const int n = 40000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(policy.sample(0, rng))];
    for (Action a = 0; a < 4; ++a) {
      const double expected = a == r.greedy[0] ? 0.4 : 0.2;
      CHECK(static_cast<double>(counts[static_cast<std::size_t>(a)]) / n ==
            doctest::Approx(expected).epsilon(0.05));
    }
  }
}

TEST_CASE("policy_evaluation matches value_iteration for the greedy policy") {
  for (const auto& [name, mdp] : convergence_fixtures()) {
    CAPTURE(name);
    const SolveResult r = value_iteration(mdp);
    const GreedyTablePolicy greedy = extract_greedy(r);
    const PolicyEvalResult pe = policy_evaluation(
        mdp,
        [&](StateIndex s, ActionDistribution& out) { greedy.action_distribution(s, out); });
    for (StateIndex s = 0; s < mdp.num_states(); ++s)
      CHECK(pe.v[static_cast<std::size_t>(s)] ==
            doctest::Approx(r.v[static_cast<std::size_t>(s)]).epsilon(1e-4));
  }
}

TEST_CASE("solve dump round-trips through the binary cache") {
  const SolveResult r = value_iteration(slippery_grid());
  const std::string path = "test_solver_cache.bin";
  save_solve(r, path, /*include_q=*/true);
  const auto loaded = load_solve(path);
  REQUIRE(loaded.has_value());
  CHECK(loaded->num_states == r.num_states);
  CHECK(loaded->num_actions == r.num_actions);
  CHECK(loaded->v == r.v);
  CHECK(loaded->greedy == r.greedy);
  REQUIRE(loaded->q.size() == r.q.size());
  for (std::size_t i = 0; i < r.q.size(); ++i) {
    if (std::isnan(r.q[i])) CHECK(std::isnan(loaded->q[i]));
    else CHECK(loaded->q[i] == r.q[i]);
  }
  std::remove(path.c_str());
  CHECK(!load_solve("does_not_exist.bin").has_value());
}
