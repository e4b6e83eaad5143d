#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/rng.hpp"

namespace mcplan {

using StateIndex = std::int32_t;

/// Fully enumerated (S, A, T, R) in compressed sparse rows, one row per
/// (state, action) pair. A row is empty iff the action is invalid at the
/// state; terminal states have only empty rows.
class TabularMdp {
 public:
  struct Entry {
    StateIndex next;
    double prob;
    double reward;
  };

  TabularMdp() = default;
  TabularMdp(StateIndex num_states, Action num_actions, double discount,
             std::vector<std::uint8_t> terminal, std::vector<std::int64_t> row_ptr,
             std::vector<StateIndex> next, std::vector<double> prob,
             std::vector<double> reward);

  StateIndex num_states() const { return num_states_; }
  Action num_actions() const { return num_actions_; }
  double discount() const { return discount_; }
  bool terminal(StateIndex s) const { return terminal_[static_cast<std::size_t>(s)] != 0; }

  std::size_t row(StateIndex s, Action a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) +
           static_cast<std::size_t>(a);
  }
  std::int64_t row_begin(StateIndex s, Action a) const { return row_ptr_[row(s, a)]; }
  std::int64_t row_end(StateIndex s, Action a) const { return row_ptr_[row(s, a) + 1]; }
  bool action_valid(StateIndex s, Action a) const { return row_begin(s, a) < row_end(s, a); }

  std::span<const StateIndex> next() const { return next_; }
  std::span<const double> prob() const { return prob_; }
  std::span<const double> reward() const { return reward_; }
  std::int64_t num_entries() const { return static_cast<std::int64_t>(next_.size()); }

  void valid_actions(StateIndex s, ActionList& out) const {
    out.clear();
    for (Action a = 0; a < num_actions_; ++a)
      if (action_valid(s, a)) out.push_back(a);
  }

  /// Bitmask of valid actions per state (num_actions <= 32 required); a
  /// compact stand-in for the action enumerator once the tables are dropped.
  std::vector<std::uint32_t> valid_action_masks() const;

  /// Min and max over all stored rewards; (0, 0) for an edgeless MDP.
  std::pair<double, double> reward_bounds() const;

  /// Checks the stated invariants: probabilities in [0, 1], each non-empty
  /// row summing to 1 within 1e-9, terminal states edgeless. Throws
  /// std::invalid_argument on violation.
  void validate() const;

 private:
  StateIndex num_states_ = 0;
  Action num_actions_ = 0;
  double discount_ = 0.0;
  std::vector<std::uint8_t> terminal_;
  std::vector<std::int64_t> row_ptr_;  // (num_states * num_actions) + 1 offsets
  std::vector<StateIndex> next_;
  std::vector<double> prob_;
  std::vector<double> reward_;
};

/// Row-at-a-time builder for small, hand-specified MDPs (tests, toy
/// problems). Domains with large state spaces fill CSR arrays directly.
class TabularMdpBuilder {
 public:
  TabularMdpBuilder(StateIndex num_states, Action num_actions, double discount);

  TabularMdpBuilder& transition(StateIndex s, Action a, StateIndex next, double prob,
                                double reward);
  /// Deterministic transition shorthand.
  TabularMdpBuilder& arc(StateIndex s, Action a, StateIndex next, double reward) {
    return transition(s, a, next, 1.0, reward);
  }
  TabularMdpBuilder& terminal(StateIndex s);

  /// Validates and assembles. The builder is left empty.
  TabularMdp build();

 private:
  StateIndex num_states_;
  Action num_actions_;
  double discount_;
  std::vector<std::uint8_t> terminal_;
  std::vector<std::vector<TabularMdp::Entry>> rows_;
};

/// GenerativeModel view of a TabularMdp; states are indices.
class TabularModel final : public GenerativeModel<StateIndex> {
 public:
  explicit TabularModel(const TabularMdp& mdp) : mdp_(&mdp) {}

  double discount() const override { return mdp_->discount(); }
  bool is_terminal(const StateIndex& s) const override { return mdp_->terminal(s); }
  void valid_actions(const StateIndex& s, ActionList& out) const override {
    mdp_->valid_actions(s, out);
  }
  StepOutcome<StateIndex> step(const StateIndex& s, Action a, Rng& rng) const override;

  const TabularMdp& mdp() const { return *mdp_; }

 private:
  const TabularMdp* mdp_;
};

}  // namespace mcplan
