#pragma once

// Small hand-built MDPs with pen-and-paper solutions. These double as the
// fixed fixtures of the convergence acceptance suite, so their shapes stay
// frozen: value changes here invalidate expectations elsewhere.

#include <deque>
#include <string>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/tabular.hpp"

namespace mcplan::testing {

/// s0 --a--> terminal, reward 1, gamma 0.9. V*(s0) = 1.
TabularMdp chain2();

/// Four states in a row, three deterministic steps, reward 1 on the last,
/// gamma 0.5. V*(s0) = 0.25.
TabularMdp corridor3();

/// Two states looping forever with reward 1 per step (no terminal),
/// gamma 0.5; run_policy for H=3 must return 1.75.
TabularMdp unit_reward_loop();

/// Root with two arms: a0 -> terminal reward 1, a1 -> terminal reward 0,
/// gamma 0.99.
TabularMdp two_armed_bandit();

/// Quit-or-continue corridor, gamma 0.9: quitting anywhere pays 0.3, walking
/// the 5-state corridor to the end pays 1. Optimal: continue everywhere.
TabularMdp quit_chain();

/// 3x3 slippery grid, gamma 0.9: moves go sideways with probability 0.1
/// each, a -0.04 living cost, +1 goal at (2,2), bumping walls stays put.
TabularMdp slippery_grid();

/// Root choice between a safe 0.5 exit and a risky 3-step corridor
/// (0.9 advance / 0.1 bust per step) paying 1; gamma 0.95. Risky is optimal.
TabularMdp two_route();

/// The three fixed convergence fixtures (quit_chain, slippery_grid,
/// two_route) with names.
struct NamedMdp {
  std::string name;
  TabularMdp mdp;
};
std::vector<NamedMdp> convergence_fixtures();

/// Single-action model emitting a fixed reward sequence, then absorbing:
/// state 0 --a0--> state 1 (terminal), with the reward popped from a script.
/// Test double for exercising backup arithmetic with chosen returns.
class ScriptedRewardModel final : public GenerativeModel<StateIndex> {
 public:
  explicit ScriptedRewardModel(std::vector<double> rewards, double discount = 0.99)
      : rewards_(rewards.begin(), rewards.end()), discount_(discount) {}

  double discount() const override { return discount_; }
  bool is_terminal(const StateIndex& s) const override { return s != 0; }
  void valid_actions(const StateIndex&, ActionList& out) const override {
    out.assign(1, 0);
  }
  StepOutcome<StateIndex> step(const StateIndex& s, Action a, Rng&) const override {
    if (s != 0 || a != 0) throw std::invalid_argument("scripted model: bad step");
    if (rewards_.empty()) throw std::logic_error("scripted model: script exhausted");
    const double r = rewards_.front();
    rewards_.pop_front();
    return {1, r};
  }

 private:
  mutable std::deque<double> rewards_;
  double discount_;
};

}  // namespace mcplan::testing
