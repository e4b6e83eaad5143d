#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/tabular.hpp"

namespace mcplan::sailing {

/// The 8 compass directions, clockwise from North. Also the action set.
enum Direction : Action { N = 0, NE, E, SE, S, SW, W, NW };

constexpr int kNumDirections = 8;

constexpr int dir_dx(int d) {
  constexpr int dx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  return dx[d & 7];
}
constexpr int dir_dy(int d) {
  constexpr int dy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  return dy[d & 7];
}
constexpr int rotate(int d, int steps) { return (d + steps) & 7; }
constexpr int opposite(int d) { return rotate(d, 4); }

/// Cost in minutes of moving along `action` under wind `wind`, before any
/// tack delay: 1/2/3/4 for angular differences 0/45/90/135 degrees.
/// Sailing straight against the wind is invalid.
int angular_cost(int action, int wind);

/// Which side of the wind a heading lies on: +1 for the three directions
/// clockwise of the wind (port), -1 counterclockwise (starboard), 0 for
/// straight downwind or upwind (no side; preserves the previous tack).
constexpr int tack_side(int heading, int wind) {
  const int r = (heading - wind) & 7;
  if (r >= 1 && r <= 3) return 1;
  if (r >= 5) return -1;
  return 0;
}

struct SailingState {
  std::int8_t x = 0, y = 0;
  std::int8_t boat = 0;       // posture: direction of the previous move
  std::int8_t wind_prev = 0;  // wind during the previous move
  std::int8_t wind_curr = 0;

  friend bool operator==(const SailingState&, const SailingState&) = default;

  std::uint32_t packed() const {
    return (static_cast<std::uint32_t>(static_cast<std::uint8_t>(x)) << 17) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(y)) << 9) |
           (static_cast<std::uint32_t>(boat) << 6) |
           (static_cast<std::uint32_t>(wind_prev) << 3) |
           static_cast<std::uint32_t>(wind_curr);
  }
};

struct Cell {
  int x = 0, y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid map with obstacles and fixed start/goal cells. Construction
/// precomputes the per-cell free-neighbour masks used by the move rules.
class SailingMap {
 public:
  SailingMap(int width, int height, std::vector<std::uint8_t> blocked, Cell start, Cell goal);

  int width() const { return width_; }
  int height() const { return height_; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }
  bool blocked(int x, int y) const {
    return blocked_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool free_cell(int x, int y) const { return in_bounds(x, y) && !blocked(x, y); }

  /// Bit d set iff moving in direction d stays on a free in-bounds cell.
  std::uint8_t exit_mask(int x, int y) const {
    return exit_masks_[static_cast<std::size_t>(y) * width_ + x];
  }

  /// True if the goal is reachable from the start through free cells,
  /// 8-connected (corner cutting allowed, matching the move rule).
  bool goal_reachable() const;

  int num_free_cells() const { return static_cast<int>(free_cells_.size()); }
  const std::vector<Cell>& free_cells() const { return free_cells_; }
  /// Rank of a free cell among free cells (row-major); -1 if blocked.
  int free_rank(int x, int y) const {
    return free_rank_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::string to_text() const;
  static SailingMap from_text(const std::string& text);
  void save(const std::string& path) const;
  static SailingMap load(const std::string& path);

 private:
  int width_, height_;
  std::vector<std::uint8_t> blocked_;
  Cell start_, goal_;
  std::vector<std::uint8_t> exit_masks_;
  std::vector<Cell> free_cells_;
  std::vector<int> free_rank_;
};

/// Valid moves: every direction except straight against the current wind,
/// off the map, or into an obstacle.
void valid_actions(const SailingState& s, const SailingMap& map, ActionList& out);

inline std::uint8_t valid_action_mask(const SailingState& s, const SailingMap& map) {
  return map.exit_mask(s.x, s.y) &
         static_cast<std::uint8_t>(~(1u << opposite(s.wind_curr)));
}

/// True when the boat has no valid action: treated as terminal; entering
/// such a state costs C_max / (1 - gamma) on top of the move cost.
inline bool trapped(const SailingState& s, const SailingMap& map) {
  return valid_action_mask(s, map) == 0;
}

/// Deterministic cost (minutes) of `action` at `s`: angular cost plus a
/// 3-minute delay when the move switches tack sides.
int move_cost(const SailingState& s, Action action);

constexpr double kMinCost = 1.0;
constexpr double kMaxCost = 7.0;

/// The Obstructed Sailing MDP. Costs are negated into rewards, so every
/// ordinary step yields a reward in [-7, -1].
class SailingModel final : public GenerativeModel<SailingState> {
 public:
  SailingModel(std::shared_ptr<const SailingMap> map, double discount);

  double discount() const override { return discount_; }
  bool is_terminal(const SailingState& s) const override {
    return (s.x == map_->goal().x && s.y == map_->goal().y) || trapped(s, *map_);
  }
  void valid_actions(const SailingState& s, ActionList& out) const override {
    sailing::valid_actions(s, *map_, out);
  }
  StepOutcome<SailingState> step(const SailingState& s, Action a, Rng& rng) const override;

  const SailingMap& map() const { return *map_; }
  double trap_penalty() const { return trap_penalty_; }

 private:
  std::shared_ptr<const SailingMap> map_;
  double discount_;
  double trap_penalty_;
};

/// The valid action closest in angle to the exact bearing towards the goal,
/// cost ignored; ties go to the clockwise side of the bearing. Requires at
/// least one valid action.
Action sail_towards_goal(const SailingState& s, const SailingMap& map);

class SailTowardsGoalPolicy final : public Policy<SailingState> {
 public:
  explicit SailTowardsGoalPolicy(std::shared_ptr<const SailingMap> map)
      : map_(std::move(map)) {}

  void action_distribution(const SailingState& s, ActionDistribution& out) const override {
    out.clear();
    out.push_back({sail_towards_goal(s, *map_), 1.0});
  }
  Action sample(const SailingState& s, Rng&) const override {
    return sail_towards_goal(s, *map_);
  }

 private:
  std::shared_ptr<const SailingMap> map_;
};

/// Optimistic all-winds-favourable value for (s, a): minus the move cost
/// plus a C_min-per-step ride over the remaining Chebyshev distance.
Prior stg_prior(const SailingState& s, Action a, const SailingMap& map, double discount);

/// argmax_a Q_STG(s, a): the cost-aware greedy over the SailTowardsGoal
/// value, used to replace random rollouts; ties to the lowest direction.
Action stg_greedy(const SailingState& s, const SailingMap& map, double discount);

class StgGreedyPolicy final : public Policy<SailingState> {
 public:
  StgGreedyPolicy(std::shared_ptr<const SailingMap> map, double discount);

  void action_distribution(const SailingState& s, ActionDistribution& out) const override {
    out.clear();
    out.push_back({sample_impl(s), 1.0});
  }
  Action sample(const SailingState& s, Rng&) const override { return sample_impl(s); }

 private:
  Action sample_impl(const SailingState& s) const;

  std::shared_ptr<const SailingMap> map_;
  double discount_;
  std::vector<double> ride_;  // C_min (1 - gamma^(d+1)) / (1 - gamma) by distance
};

class StgPrior final : public PriorValue<SailingState> {
 public:
  StgPrior(std::shared_ptr<const SailingMap> map, double discount)
      : map_(std::move(map)), discount_(discount) {}
  Prior prior(const SailingState& s, Action a) const override {
    return stg_prior(s, a, *map_, discount_);
  }

 private:
  std::shared_ptr<const SailingMap> map_;
  double discount_;
};

struct GenerateMapResult {
  std::shared_ptr<const SailingMap> map;
  int rejections = 0;
};

/// Random map: each non-start, non-goal cell blocked with probability p,
/// resampled until start and goal are connected. Throws std::runtime_error
/// after `max_rejections` failures.
GenerateMapResult generate_map(int width, int height, double block_probability, Cell start,
                               Cell goal, Rng& rng, int max_rejections = 10000);

/// Enumeration order and indexing of the tabular form: states are
/// (free-cell rank, boat, wind_prev, wind_curr) in mixed radix 8*8*8.
class SailingSpace {
 public:
  explicit SailingSpace(std::shared_ptr<const SailingMap> map) : map_(std::move(map)) {}

  StateIndex num_states() const {
    return static_cast<StateIndex>(map_->num_free_cells()) * 512;
  }
  StateIndex index(const SailingState& s) const {
    const int rank = map_->free_rank(s.x, s.y);
    return static_cast<StateIndex>(((rank * 8 + s.boat) * 8 + s.wind_prev) * 8 +
                                   s.wind_curr);
  }
  SailingState state(StateIndex i) const {
    SailingState s;
    s.wind_curr = static_cast<std::int8_t>(i & 7);
    s.wind_prev = static_cast<std::int8_t>((i >> 3) & 7);
    s.boat = static_cast<std::int8_t>((i >> 6) & 7);
    const Cell c = map_->free_cells()[static_cast<std::size_t>(i >> 9)];
    s.x = static_cast<std::int8_t>(c.x);
    s.y = static_cast<std::int8_t>(c.y);
    return s;
  }
  const SailingMap& map() const { return *map_; }

  std::function<StateIndex(const SailingState&)> indexer() const {
    return [space = *this](const SailingState& s) { return space.index(s); };
  }

 private:
  std::shared_ptr<const SailingMap> map_;
};

/// Exact tabular form of the sailing MDP over all states of the space;
/// transition and reward tables match SailingModel::step's distribution.
TabularMdp to_tabular(const SailingSpace& space, double discount);

/// Uniformly random boat posture and wind pair at the map's start cell.
SailingState sample_start_state(const SailingMap& map, Rng& rng);

}  // namespace mcplan::sailing

template <>
struct std::hash<mcplan::sailing::SailingState> {
  std::size_t operator()(const mcplan::sailing::SailingState& s) const noexcept {
    return std::size_t(mcplan::mix64(s.packed()));
  }
};
