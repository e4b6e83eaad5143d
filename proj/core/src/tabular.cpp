#include "mcplan/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcplan {

TabularMdp::TabularMdp(StateIndex num_states, Action num_actions, double discount,
                       std::vector<std::uint8_t> terminal, std::vector<std::int64_t> row_ptr,
                       std::vector<StateIndex> next, std::vector<double> prob,
                       std::vector<double> reward)
    : num_states_(num_states),
      num_actions_(num_actions),
      discount_(discount),
      terminal_(std::move(terminal)),
      row_ptr_(std::move(row_ptr)),
      next_(std::move(next)),
      prob_(std::move(prob)),
      reward_(std::move(reward)) {
  if (num_states_ < 0 || num_actions_ <= 0)
    throw std::invalid_argument("TabularMdp: bad dimensions");
  if (!(discount_ >= 0.0 && discount_ < 1.0))
    throw std::invalid_argument("TabularMdp: discount must be in [0,1)");
  const std::size_t rows = static_cast<std::size_t>(num_states_) * num_actions_;
  if (terminal_.size() != static_cast<std::size_t>(num_states_) ||
      row_ptr_.size() != rows + 1 || next_.size() != prob_.size() ||
      next_.size() != reward_.size())
    throw std::invalid_argument("TabularMdp: inconsistent table sizes");
}

std::vector<std::uint32_t> TabularMdp::valid_action_masks() const {
  if (num_actions_ > 32) throw std::invalid_argument("valid_action_masks: > 32 actions");
  std::vector<std::uint32_t> masks(static_cast<std::size_t>(num_states_), 0);
  for (StateIndex s = 0; s < num_states_; ++s)
    for (Action a = 0; a < num_actions_; ++a)
      if (action_valid(s, a)) masks[static_cast<std::size_t>(s)] |= (1u << a);
  return masks;
}

std::pair<double, double> TabularMdp::reward_bounds() const {
  if (reward_.empty()) return {0.0, 0.0};
  auto [lo, hi] = std::minmax_element(reward_.begin(), reward_.end());
  return {*lo, *hi};
}

void TabularMdp::validate() const {
  for (StateIndex s = 0; s < num_states_; ++s) {
    for (Action a = 0; a < num_actions_; ++a) {
      const auto b = row_begin(s, a), e = row_end(s, a);
      if (b == e) continue;
      if (terminal(s))
        throw std::invalid_argument("TabularMdp: terminal state " + std::to_string(s) +
                                    " has outgoing transitions");
      double sum = 0.0;
      for (auto i = b; i < e; ++i) {
        const double p = prob_[static_cast<std::size_t>(i)];
        if (!(p >= 0.0 && p <= 1.0))
          throw std::invalid_argument("TabularMdp: probability out of [0,1]");
        const StateIndex n = next_[static_cast<std::size_t>(i)];
        if (n < 0 || n >= num_states_)
          throw std::invalid_argument("TabularMdp: next state out of range");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("TabularMdp: row (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") sums to " + std::to_string(sum));
    }
  }
}

TabularMdpBuilder::TabularMdpBuilder(StateIndex num_states, Action num_actions,
                                     double discount)
    : num_states_(num_states),
      num_actions_(num_actions),
      discount_(discount),
      terminal_(static_cast<std::size_t>(num_states), 0),
      rows_(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions)) {}

TabularMdpBuilder& TabularMdpBuilder::transition(StateIndex s, Action a, StateIndex next,
                                                 double prob, double reward) {
  rows_.at(static_cast<std::size_t>(s) * num_actions_ + static_cast<std::size_t>(a))
      .push_back({next, prob, reward});
  return *this;
}

TabularMdpBuilder& TabularMdpBuilder::terminal(StateIndex s) {
  terminal_.at(static_cast<std::size_t>(s)) = 1;
  return *this;
}

TabularMdp TabularMdpBuilder::build() {
  std::vector<std::int64_t> row_ptr(rows_.size() + 1, 0);
  std::size_t total = 0;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    row_ptr[r] = static_cast<std::int64_t>(total);
    total += rows_[r].size();
  }
  row_ptr[rows_.size()] = static_cast<std::int64_t>(total);

  std::vector<StateIndex> next(total);
  std::vector<double> prob(total), reward(total);
  std::size_t i = 0;
  for (const auto& row : rows_) {
    for (const auto& e : row) {
      next[i] = e.next;
      prob[i] = e.prob;
      reward[i] = e.reward;
      ++i;
    }
  }
  TabularMdp mdp(num_states_, num_actions_, discount_, std::move(terminal_),
                 std::move(row_ptr), std::move(next), std::move(prob), std::move(reward));
  mdp.validate();
  rows_.clear();
  terminal_.assign(static_cast<std::size_t>(num_states_), 0);
  return mdp;
}

StepOutcome<StateIndex> TabularModel::step(const StateIndex& s, Action a, Rng& rng) const {
  if (a < 0 || a >= mdp_->num_actions() || !mdp_->action_valid(s, a))
    throw std::invalid_argument("TabularModel::step: invalid action " + std::to_string(a) +
                                " at state " + std::to_string(s));
  const auto b = mdp_->row_begin(s, a), e = mdp_->row_end(s, a);
  const auto next = mdp_->next();
  const auto prob = mdp_->prob();
  const auto reward = mdp_->reward();
  const double u = rng.uniform01();
  double acc = 0.0;
  std::int64_t pick = e - 1;
  for (auto i = b; i < e; ++i) {
    acc += prob[static_cast<std::size_t>(i)];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  return {next[static_cast<std::size_t>(pick)], reward[static_cast<std::size_t>(pick)]};
}

}  // namespace mcplan
