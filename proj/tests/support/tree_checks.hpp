#pragma once

// Structural checks over a UCT tree: the count-conservation identity,
// auxiliary-arm childlessness, the 2|A| arm bound and the reward hull on
// Q_UCT. Violations throw std::logic_error so the checks serve both the
// doctest suites and the acceptance binary.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "mcplan/uct.hpp"

namespace mcplan::testing {

struct TreeCounts {
  std::int64_t state_nodes = 0;
  std::int64_t arm_nodes = 0;
};

namespace detail {
inline void expect(bool ok, const char* what) {
  if (!ok) throw std::logic_error(std::string("tree invariant violated: ") + what);
}
}  // namespace detail

/// q_lo/q_hi bound every prior-free Q_UCT: min(0, r_min/(1-gamma)) and
/// max(0, r_max/(1-gamma)); the zero endpoint accounts for terminal and
/// horizon-cut tails. Prior-seeded arms may extend the hull to their prior.
template <typename State>
void check_node_invariants(const StateNode<State>& node, const GenerativeModel<State>& model,
                           double q_lo, double q_hi, TreeCounts& counts) {
  ++counts.state_nodes;
  if (!node.expanded) {
    detail::expect(node.arms.empty(), "leaf node with arms");
    detail::expect(node.visits == node.endpoint_visits, "leaf visits != endpoint visits");
    return;
  }
  const std::size_t num_valid = model.valid_actions(node.state).size();
  detail::expect(node.arms.size() <= 2 * num_valid, "arm count above 2|A|");

  std::int64_t arm_visits_net = 0;
  for (const auto& arm : node.arms) {
    ++counts.arm_nodes;
    detail::expect(arm.visits >= arm.prior_visits, "visits below prior count");
    arm_visits_net += arm.visits - arm.prior_visits;
    if (arm.kind == ArmKind::Auxiliary) {
      detail::expect(arm.children.empty(), "auxiliary arm with children");
      detail::expect(arm.prior_visits == 0, "auxiliary arm with prior mass");
    }
    if (arm.visits > 0) {
      double lo = q_lo, hi = q_hi;
      if (arm.prior_visits > 0) {
        lo = std::min(lo, arm.q);
        hi = std::max(hi, arm.q);
      }
      detail::expect(arm.q >= lo - 1e-9 && arm.q <= hi + 1e-9, "Q outside reward hull");
    }
    for (const auto& [key, child] : arm.children)
      check_node_invariants(*child, model, q_lo, q_hi, counts);
  }
  detail::expect(node.visits == node.prior_mass + node.endpoint_visits + arm_visits_net,
                 "count conservation");
}

template <typename State>
TreeCounts check_tree_invariants(const UctSearch<State>& search,
                                 const GenerativeModel<State>& model, double r_min,
                                 double r_max) {
  const double gamma = model.discount();
  const double q_lo = std::min(0.0, r_min / (1.0 - gamma));
  const double q_hi = std::max(0.0, r_max / (1.0 - gamma));
  TreeCounts counts;
  check_node_invariants(search.root(), model, q_lo, q_hi, counts);
  detail::expect(counts.state_nodes == search.state_nodes(), "state-node count drift");
  detail::expect(counts.arm_nodes == search.arm_nodes(), "arm-node count drift");
  return counts;
}

/// Tracks that per-node visit counts never decrease across checkpoints.
template <typename State>
class VisitMonotonicityTracker {
 public:
  void snapshot(const StateNode<State>& node) {
    auto it = last_.find(&node);
    if (it == last_.end()) {
      last_.emplace(&node, node.visits);
    } else {
      detail::expect(node.visits >= it->second, "state visits decreased");
      it->second = node.visits;
    }
    for (const auto& arm : node.arms) {
      auto ait = arm_last_.find(&arm);
      if (ait == arm_last_.end()) {
        arm_last_.emplace(&arm, arm.visits);
      } else {
        detail::expect(arm.visits >= ait->second, "arm visits decreased");
        ait->second = arm.visits;
      }
      for (const auto& [key, child] : arm.children) snapshot(*child);
    }
  }

 private:
  std::unordered_map<const void*, std::int64_t> last_;
  std::unordered_map<const void*, std::int64_t> arm_last_;
};

}  // namespace mcplan::testing
