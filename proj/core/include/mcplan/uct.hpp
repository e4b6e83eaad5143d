#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/rng.hpp"

namespace mcplan {

enum class ArmKind : std::uint8_t { Ordinary, Auxiliary };

enum class RecommendationRule : std::uint8_t { HighestQ, HighestN };

/// Hooks are non-owning; a null prior / rollout policy / aux policy gives
/// vanilla UCT. rollout_policy defaults to uniform random over valid actions.
template <typename State>
struct SearchConfig {
  double exploration_constant = 1.0;  // C_p
  int horizon = 1;                    // rollout depth cutoff from the root
  int budget = 1;                     // number of simulations per search
  const PriorValue<State>* prior = nullptr;       // UCT-I
  const Policy<State>* rollout_policy = nullptr;  // UCT-S
  const Policy<State>* aux_policy = nullptr;      // UCT-Aux
  RecommendationRule recommendation = RecommendationRule::HighestQ;

  void check() const {
    if (!(exploration_constant > 0.0))
      throw std::invalid_argument("SearchConfig: exploration constant must be > 0");
    if (horizon < 1) throw std::invalid_argument("SearchConfig: horizon must be >= 1");
    if (budget < 1) throw std::invalid_argument("SearchConfig: budget must be >= 1");
  }
};

template <typename State>
struct StateNode;

/// State-action node. Auxiliary arms never acquire children: selecting one
/// finishes the episode with the auxiliary policy instead of expanding.
template <typename State>
struct ArmNode {
  Action action = 0;
  ArmKind kind = ArmKind::Ordinary;
  std::int64_t visits = 0;        // n(s,a), includes prior_visits
  std::int64_t prior_visits = 0;  // n_prior(s,a) injected at expansion
  double q = 0.0;                 // Q_UCT(s,a)
  std::vector<std::pair<State, std::unique_ptr<StateNode<State>>>> children;

  StateNode<State>* child_for(const State& s) {
    for (auto& [key, node] : children)
      if (key == s) return node.get();
    return nullptr;
  }
};

template <typename State>
struct StateNode {
  State state;
  std::int64_t visits = 0;           // n(s), includes prior mass and endpoint visits
  std::int64_t prior_mass = 0;       // sum of arm prior visits added at expansion
  std::int64_t endpoint_visits = 0;  // rollouts that ended here without selecting an arm
  bool expanded = false;             // leaf vs internal
  std::vector<ArmNode<State>> arms;

  explicit StateNode(State s) : state(std::move(s)) {}
};

struct RootArmStat {
  Action action = 0;
  ArmKind kind = ArmKind::Ordinary;
  std::int64_t visits = 0;
  std::int64_t prior_visits = 0;
  double q = 0.0;
};

struct SearchDiagnostics {
  Action recommended = -1;
  ArmKind recommended_kind = ArmKind::Ordinary;
  std::int64_t state_nodes = 0;
  std::int64_t arm_nodes = 0;
  std::int64_t rollouts = 0;
  std::vector<RootArmStat> root_arms;

  std::int64_t tree_nodes() const { return state_nodes + arm_nodes; }
};

/// UCB1 score per the arm-selection rule: Q + 2 C_p sqrt(log n(s) / n(s,a)).
inline double ucb_score(double q, std::int64_t arm_visits, double log_parent_visits,
                        double exploration_constant) {
  return q + 2.0 * exploration_constant *
                 std::sqrt(log_parent_visits / static_cast<double>(arm_visits));
}

/// Completes an episode from `s` with `policy` for at most depth_remaining
/// steps or until terminal; returns the return discounted from `s`.
template <typename State>
double rollout(const GenerativeModel<State>& model, const Policy<State>& policy, State s,
               int depth_remaining, Rng& model_rng, Rng& policy_rng) {
  if (depth_remaining < 0) throw std::invalid_argument("rollout: negative depth");
  const double gamma = model.discount();
  double g = 0.0;
  double w = 1.0;
  for (int t = 0; t < depth_remaining && !model.is_terminal(s); ++t) {
    const Action a = policy.sample(s, policy_rng);
    auto out = model.step(s, a, model_rng);
    g += w * out.reward;
    w *= gamma;
    s = std::move(out.state);
  }
  return g;
}

/// One search tree with exclusive ownership of its rng streams. A search is
/// single-writer; run independent searches for parallel trials.
template <typename State>
class UctSearch {
 public:
  UctSearch(const GenerativeModel<State>& model, const SearchConfig<State>& config,
            State root_state, Rng rng)
      : model_(&model), config_(config), master_rng_(rng) {
    config_.check();
    if (model.is_terminal(root_state))
      throw std::invalid_argument("UctSearch: root state is terminal");
    // Fixed stream split: tie-breaking, model sampling, policy sampling.
    tie_rng_ = master_rng_.split();
    model_rng_ = master_rng_.split();
    policy_rng_ = master_rng_.split();
    if (!config_.rollout_policy) {
      default_rollout_ = std::make_unique<UniformRandomPolicy<State>>(model);
      config_.rollout_policy = default_rollout_.get();
    }
    root_ = std::make_unique<StateNode<State>>(std::move(root_state));
    state_nodes_ = 1;
  }

  /// Creates one ordinary arm per valid action (seeded from the prior when
  /// configured) plus one auxiliary arm per support action of the auxiliary
  /// policy; the node becomes internal.
  void expand_leaf(StateNode<State>& node) {
    if (node.expanded) throw std::logic_error("expand_leaf: node already internal");
    scratch_actions_.clear();
    model_->valid_actions(node.state, scratch_actions_);
    if (scratch_actions_.empty())
      throw std::domain_error("expand_leaf: no valid actions at a non-terminal state");
    node.arms.reserve(scratch_actions_.size());
    for (Action a : scratch_actions_) {
      ArmNode<State> arm;
      arm.action = a;
      if (config_.prior) {
        const Prior p = config_.prior->prior(node.state, a);
        if (p.visits < 0) throw std::invalid_argument("expand_leaf: negative prior count");
        arm.visits = p.visits;
        arm.prior_visits = p.visits;
        arm.q = p.visits > 0 ? p.q : 0.0;
        node.prior_mass += p.visits;
      }
      node.arms.push_back(std::move(arm));
    }
    if (config_.aux_policy) {
      scratch_dist_.clear();
      config_.aux_policy->action_distribution(node.state, scratch_dist_);
      for (const auto& ap : scratch_dist_) {
        ArmNode<State> arm;
        arm.action = ap.action;
        arm.kind = ArmKind::Auxiliary;
        node.arms.push_back(std::move(arm));
      }
    }
    node.visits += node.prior_mass;
    node.expanded = true;
    arm_nodes_ += static_cast<std::int64_t>(node.arms.size());
  }

  /// UCB1 arm selection with the first-play rule: unvisited arms are taken
  /// before any visited arm, uniformly at random among themselves; exact
  /// score ties are broken uniformly at random.
  ArmNode<State>& select_arm(StateNode<State>& node) {
    scratch_ties_.clear();
    for (std::size_t i = 0; i < node.arms.size(); ++i)
      if (node.arms[i].visits == 0) scratch_ties_.push_back(i);
    if (!scratch_ties_.empty()) return node.arms[pick_tied()];

    const double log_n = std::log(static_cast<double>(node.visits));
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < node.arms.size(); ++i) {
      const auto& arm = node.arms[i];
      const double score = ucb_score(arm.q, arm.visits, log_n, config_.exploration_constant);
      if (score > best) {
        best = score;
        scratch_ties_.clear();
        scratch_ties_.push_back(i);
      } else if (score == best) {
        scratch_ties_.push_back(i);
      }
    }
    return node.arms[pick_tied()];
  }

  /// One simulation: descend by select_arm, expand the first leaf reached,
  /// finish with the rollout policy (or the auxiliary policy if an auxiliary
  /// arm was chosen), then back the discounted return up the traversed path.
  double simulate() {
    path_.clear();
    StateNode<State>* node = root_.get();
    int depth = 0;
    double tail = 0.0;
    StateNode<State>* endpoint = nullptr;
    const double gamma = model_->discount();

    for (;;) {
      if (model_->is_terminal(node->state) || depth >= config_.horizon) {
        endpoint = node;
        break;
      }
      const bool fresh = !node->expanded;
      if (fresh) expand_leaf(*node);
      ArmNode<State>& arm = select_arm(*node);
      if (arm.kind == ArmKind::Auxiliary) {
        auto out = model_->step(node->state, arm.action, model_rng_);
        tail = rollout(*model_, *config_.aux_policy, std::move(out.state),
                       config_.horizon - depth - 1, model_rng_, policy_rng_);
        path_.push_back({node, &arm, out.reward});
        break;
      }
      auto out = model_->step(node->state, arm.action, model_rng_);
      StateNode<State>* child = arm.child_for(out.state);
      if (!child) {
        arm.children.emplace_back(out.state,
                                  std::make_unique<StateNode<State>>(out.state));
        child = arm.children.back().second.get();
        ++state_nodes_;
      }
      path_.push_back({node, &arm, out.reward});
      if (fresh) {
        tail = rollout(*model_, *config_.rollout_policy, std::move(out.state),
                       config_.horizon - depth - 1, model_rng_, policy_rng_);
        endpoint = child;
        break;
      }
      node = child;
      ++depth;
    }

    if (endpoint) {
      ++endpoint->visits;
      ++endpoint->endpoint_visits;
    }
    double g = tail;
    for (auto it = path_.rbegin(); it != path_.rend(); ++it) {
      g = it->reward + gamma * g;
      ++it->arm->visits;
      it->arm->q += (g - it->arm->q) / static_cast<double>(it->arm->visits);
      ++it->node->visits;
    }
    ++rollouts_;
    return g;
  }

  /// Runs the configured budget of simulations and recommends a root arm.
  SearchDiagnostics search() {
    for (int i = 0; i < config_.budget; ++i) simulate();
    return diagnostics();
  }

  SearchDiagnostics diagnostics() {
    SearchDiagnostics d;
    d.state_nodes = state_nodes_;
    d.arm_nodes = arm_nodes_;
    d.rollouts = rollouts_;
    d.root_arms.reserve(root_->arms.size());
    for (const auto& arm : root_->arms)
      d.root_arms.push_back({arm.action, arm.kind, arm.visits, arm.prior_visits, arm.q});
    const ArmNode<State>& best = recommend_arm();
    d.recommended = best.action;
    d.recommended_kind = best.kind;
    return d;
  }

  /// Root recommendation over ordinary and auxiliary arms; a recommended
  /// auxiliary arm means "play the auxiliary policy's action".
  const ArmNode<State>& recommend_arm() {
    const auto& arms = root_->arms;
    if (arms.empty()) throw std::logic_error("recommend_arm: root never expanded");
    scratch_ties_.clear();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < arms.size(); ++i) {
      const double stat = config_.recommendation == RecommendationRule::HighestQ
                              ? arms[i].q
                              : static_cast<double>(arms[i].visits);
      if (stat > best) {
        best = stat;
        scratch_ties_.clear();
        scratch_ties_.push_back(i);
      } else if (stat == best) {
        scratch_ties_.push_back(i);
      }
    }
    return arms[pick_tied()];
  }

  const StateNode<State>& root() const { return *root_; }
  const GenerativeModel<State>& model() const { return *model_; }
  const SearchConfig<State>& config() const { return config_; }
  std::int64_t state_nodes() const { return state_nodes_; }
  std::int64_t arm_nodes() const { return arm_nodes_; }
  std::int64_t rollouts() const { return rollouts_; }

  /// Canonical dump of the whole tree with bit-exact Q values; creation
  /// order, so equal strings mean equal search traces.
  std::string debug_dump() const {
    std::ostringstream os;
    os.precision(17);
    dump_node(os, *root_, 0);
    return os.str();
  }

 private:
  struct PathStep {
    StateNode<State>* node;
    ArmNode<State>* arm;
    double reward;
  };

  std::size_t pick_tied() {
    if (scratch_ties_.size() == 1) return scratch_ties_[0];
    return scratch_ties_[tie_rng_.uniform_int(scratch_ties_.size())];
  }

  void dump_node(std::ostringstream& os, const StateNode<State>& node, int depth) const {
    os << depth << "|n=" << node.visits << "|p=" << node.prior_mass
       << "|e=" << node.endpoint_visits << "|x=" << node.expanded << "\n";
    for (const auto& arm : node.arms) {
      os << depth << "|a=" << arm.action << (arm.kind == ArmKind::Auxiliary ? "*" : "")
         << "|n=" << arm.visits << "|q=";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%a", arm.q);
      os << buf << "|c=" << arm.children.size() << "\n";
      for (const auto& [key, child] : arm.children) dump_node(os, *child, depth + 1);
    }
  }

  const GenerativeModel<State>* model_;
  SearchConfig<State> config_;
  Rng master_rng_, tie_rng_, model_rng_, policy_rng_;
  std::unique_ptr<UniformRandomPolicy<State>> default_rollout_;
  std::unique_ptr<StateNode<State>> root_;
  std::int64_t state_nodes_ = 0;
  std::int64_t arm_nodes_ = 0;
  std::int64_t rollouts_ = 0;
  std::vector<PathStep> path_;
  ActionList scratch_actions_;
  ActionDistribution scratch_dist_;
  std::vector<std::size_t> scratch_ties_;
};

struct EpisodeResult {
  double return_value = 0.0;
  int steps = 0;
  std::int64_t searches = 0;
  double mean_tree_nodes = 0.0;  // per search
  double wall_ms = 0.0;
};

/// Per-step replanning: a fresh tree per decision, the recommended action
/// executed on the environment, discounted return accumulated until terminal
/// or max_steps. The master rng is split into one environment stream plus
/// one stream per search, so trials are reproducible end to end.
template <typename State>
EpisodeResult plan_episode(const GenerativeModel<State>& model, State start,
                           const SearchConfig<State>& config, int max_steps, Rng rng,
                           std::vector<SearchDiagnostics>* search_log = nullptr) {
  if (max_steps < 1) throw std::invalid_argument("plan_episode: max_steps must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  Rng env_rng = rng.split();
  const double gamma = model.discount();
  EpisodeResult out;
  double w = 1.0;
  std::int64_t total_nodes = 0;
  State s = std::move(start);
  while (out.steps < max_steps && !model.is_terminal(s)) {
    UctSearch<State> search(model, config, s, rng.split());
    SearchDiagnostics diag = search.search();
    total_nodes += diag.tree_nodes();
    ++out.searches;
    if (search_log) search_log->push_back(diag);
    auto step = model.step(s, diag.recommended, env_rng);
    out.return_value += w * step.reward;
    w *= gamma;
    s = std::move(step.state);
    ++out.steps;
  }
  if (out.searches > 0)
    out.mean_tree_nodes =
        static_cast<double>(total_nodes) / static_cast<double>(out.searches);
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

}  // namespace mcplan
