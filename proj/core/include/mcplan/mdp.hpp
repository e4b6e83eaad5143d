#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mcplan/rng.hpp"

namespace mcplan {

using Action = std::int32_t;

using ActionList = std::vector<Action>;

struct ActionProb {
  Action action = 0;
  double prob = 0.0;
};

using ActionDistribution = std::vector<ActionProb>;

template <typename State>
struct StepOutcome {
  State state;
  double reward = 0.0;
};

/// Sampling-only view of an MDP: everything tree search needs. Implementations
/// must be pure given the rng stream (identical seeds, identical trajectories)
/// and must report a non-empty action set at every non-terminal state.
template <typename State>
class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;

  virtual double discount() const = 0;
  virtual bool is_terminal(const State& s) const = 0;
  /// Fills `out` with the valid actions at `s`, in a fixed order.
  virtual void valid_actions(const State& s, ActionList& out) const = 0;
  /// Samples one transition. Throws std::invalid_argument if `a` is not
  /// valid at `s`.
  virtual StepOutcome<State> step(const State& s, Action a, Rng& rng) const = 0;

  ActionList valid_actions(const State& s) const {
    ActionList out;
    valid_actions(s, out);
    return out;
  }
};

/// A possibly stochastic state -> action-distribution map. Distributions
/// list positive-probability actions only, so the support size kappa(s) is
/// the entry count.
template <typename State>
class Policy {
 public:
  virtual ~Policy() = default;

  /// Fills `out` with (action, probability) pairs summing to 1; only
  /// positive-probability actions appear, in a fixed order.
  virtual void action_distribution(const State& s, ActionDistribution& out) const = 0;

  /// Draws an action. The default draws from action_distribution; hot
  /// policies override with a direct sampler.
  virtual Action sample(const State& s, Rng& rng) const {
    thread_local ActionDistribution dist;
    dist.clear();
    action_distribution(s, dist);
    assert(!dist.empty());
    const double u = rng.uniform01();
    double acc = 0.0;
    for (const auto& ap : dist) {
      acc += ap.prob;
      if (u < acc) return ap.action;
    }
    return dist.back().action;
  }

  std::size_t support_size(const State& s) const {
    thread_local ActionDistribution dist;
    dist.clear();
    action_distribution(s, dist);
    return dist.size();
  }
};

/// Uniform over the model's valid actions; the vanilla rollout policy.
template <typename State>
class UniformRandomPolicy final : public Policy<State> {
 public:
  explicit UniformRandomPolicy(const GenerativeModel<State>& model) : model_(&model) {}

  void action_distribution(const State& s, ActionDistribution& out) const override {
    thread_local ActionList acts;
    acts.clear();
    model_->valid_actions(s, acts);
    out.clear();
    const double p = 1.0 / static_cast<double>(acts.size());
    for (Action a : acts) out.push_back({a, p});
  }

  Action sample(const State& s, Rng& rng) const override {
    thread_local ActionList acts;
    acts.clear();
    model_->valid_actions(s, acts);
    assert(!acts.empty());
    return acts[rng.uniform_int(acts.size())];
  }

 private:
  const GenerativeModel<State>* model_;
};

struct Prior {
  std::int64_t visits = 0;  // n_prior(s,a), >= 0
  double q = 0.0;           // Q_prior(s,a)
};

/// Optional (Q_prior, n_prior) source for node initialization.
template <typename State>
class PriorValue {
 public:
  virtual ~PriorValue() = default;
  virtual Prior prior(const State& s, Action a) const = 0;
};

/// The degenerate prior (0, 0); equivalent to running without one.
template <typename State>
class ZeroPrior final : public PriorValue<State> {
 public:
  Prior prior(const State&, Action) const override { return {0, 0.0}; }
};

/// Sum_t discount^t * rewards[t]; the empty list is 0.
inline double discounted_return(std::span<const double> rewards, double discount) {
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("discounted_return: discount must be in [0,1)");
  double g = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    g += w * r;
    w *= discount;
  }
  return g;
}

template <typename State>
struct PolicyRunResult {
  double return_value = 0.0;
  int steps = 0;
  State final_state;
};

/// Simulates `policy` from `start` for at most `horizon` steps or until a
/// terminal state, returning the discounted return from `start`. Throws
/// std::invalid_argument (via the model) if the policy emits an action that
/// is invalid at the current state.
template <typename State>
PolicyRunResult<State> run_policy(const GenerativeModel<State>& model,
                                  const Policy<State>& policy, State start,
                                  int horizon, Rng& rng) {
  if (horizon < 0) throw std::invalid_argument("run_policy: horizon must be >= 0");
  const double gamma = model.discount();
  double g = 0.0;
  double w = 1.0;
  int t = 0;
  State s = std::move(start);
  while (t < horizon && !model.is_terminal(s)) {
    const Action a = policy.sample(s, rng);
    auto out = model.step(s, a, rng);
    g += w * out.reward;
    w *= gamma;
    s = std::move(out.state);
    ++t;
  }
  return {g, t, std::move(s)};
}

}  // namespace mcplan
