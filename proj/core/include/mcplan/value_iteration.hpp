#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/tabular.hpp"

namespace mcplan {

/// Output of value_iteration: V*, Q*, the greedy policy table, and
/// convergence bookkeeping. q entries for invalid (s, a) pairs are NaN;
/// greedy is -1 at terminal states.
struct SolveResult {
  StateIndex num_states = 0;
  Action num_actions = 0;
  double discount = 0.0;
  std::vector<double> v;         // V*(s)
  std::vector<double> q;         // Q*(s,a), row-major s*num_actions + a
  std::vector<Action> greedy;    // argmax_a Q*(s,a), lowest index on ties
  int iterations = 0;
  double residual = 0.0;         // final max Bellman update magnitude
  std::vector<double> residual_history;

  double q_at(StateIndex s, Action a) const {
    return q[static_cast<std::size_t>(s) * num_actions + static_cast<std::size_t>(a)];
  }
};

struct SolveSettings {
  double tolerance = 1e-6;
  /// 0 means "derive from the discount-contraction bound":
  /// ceil(10 * log(tol * (1-gamma) / R_max) / log(gamma)).
  int max_iterations = 0;
  bool record_residuals = false;
};

/// Synchronous (Jacobi) value iteration from V0 = 0, double buffered.
/// Terminal states keep V = 0. Throws std::runtime_error if max iterations
/// are exhausted with the residual above tolerance.
SolveResult value_iteration(const TabularMdp& mdp, const SolveSettings& settings = {});

/// Iterative evaluation of a fixed stochastic policy given as per-state
/// distributions over valid actions. Returns V^pi and Q^pi in the same
/// layout as SolveResult (greedy left empty).
struct PolicyEvalResult {
  std::vector<double> v;
  std::vector<double> q;
  int iterations = 0;
  double residual = 0.0;
};
PolicyEvalResult policy_evaluation(const TabularMdp& mdp,
                                   const std::function<void(StateIndex, ActionDistribution&)>& policy,
                                   const SolveSettings& settings = {});

/// Deterministic greedy policy over tabular states; ties broken by lowest
/// action index.
class GreedyTablePolicy final : public Policy<StateIndex> {
 public:
  explicit GreedyTablePolicy(std::vector<Action> greedy) : greedy_(std::move(greedy)) {}

  void action_distribution(const StateIndex& s, ActionDistribution& out) const override {
    out.clear();
    out.push_back({greedy_.at(static_cast<std::size_t>(s)), 1.0});
  }
  Action sample(const StateIndex& s, Rng&) const override {
    return greedy_.at(static_cast<std::size_t>(s));
  }

 private:
  std::vector<Action> greedy_;
};

GreedyTablePolicy extract_greedy(const SolveResult& result);

/// StochasticOptimal.p: probability mass p on the greedy action plus a
/// (1-p) uniform share over all valid actions (the greedy action included).
class StochasticOptimalPolicy final : public Policy<StateIndex> {
 public:
  StochasticOptimalPolicy(std::vector<Action> greedy, std::vector<std::uint32_t> valid_masks,
                          double p);

  void action_distribution(const StateIndex& s, ActionDistribution& out) const override;
  Action sample(const StateIndex& s, Rng& rng) const override;

  double p() const { return p_; }

 private:
  std::vector<Action> greedy_;
  std::vector<std::uint32_t> valid_masks_;
  double p_;
};

StochasticOptimalPolicy stochastic_optimal(const SolveResult& result, double p,
                                           std::vector<std::uint32_t> valid_masks);
StochasticOptimalPolicy stochastic_optimal(const SolveResult& result, double p,
                                           const TabularMdp& mdp);

/// Adapts an index-space policy to a domain state type via a state->index
/// map. Action ids must agree between the two spaces.
template <typename State>
class IndexedPolicy final : public Policy<State> {
 public:
  IndexedPolicy(std::shared_ptr<const Policy<StateIndex>> inner,
                std::function<StateIndex(const State&)> index)
      : inner_(std::move(inner)), index_(std::move(index)) {}

  void action_distribution(const State& s, ActionDistribution& out) const override {
    inner_->action_distribution(index_(s), out);
  }
  Action sample(const State& s, Rng& rng) const override {
    return inner_->sample(index_(s), rng);
  }

 private:
  std::shared_ptr<const Policy<StateIndex>> inner_;
  std::function<StateIndex(const State&)> index_;
};

/// Prior backed by a dense per-(state, action) Q table with a fixed count;
/// used to seed UCT-I from an evaluated heuristic policy.
template <typename State>
class TableQPrior final : public PriorValue<State> {
 public:
  TableQPrior(std::vector<double> q, Action num_actions,
              std::function<StateIndex(const State&)> index, std::int64_t n_prior = 1)
      : q_(std::move(q)), num_actions_(num_actions), index_(std::move(index)), n_(n_prior) {}

  Prior prior(const State& s, Action a) const override {
    const auto i = static_cast<std::size_t>(index_(s)) * num_actions_ +
                   static_cast<std::size_t>(a);
    return {n_, q_.at(i)};
  }

 private:
  std::vector<double> q_;
  Action num_actions_;
  std::function<StateIndex(const State&)> index_;
  std::int64_t n_;
};

/// Binary cache of a SolveResult (v, greedy, optionally q).
void save_solve(const SolveResult& result, const std::string& path, bool include_q = true);
std::optional<SolveResult> load_solve(const std::string& path);

/// CSV dump, schema: state,v_star,greedy_action.
void write_solve_csv(const SolveResult& result, std::ostream& os);

}  // namespace mcplan
