#include "mcplan/sailing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mcplan::sailing {

int angular_cost(int action, int wind) {
  static constexpr int cost_by_offset[8] = {1, 2, 3, 4, -1, 4, 3, 2};
  const int c = cost_by_offset[(action - wind) & 7];
  if (c < 0) throw std::invalid_argument("angular_cost: sailing straight upwind");
  return c;
}

int move_cost(const SailingState& s, Action action) {
  int cost = angular_cost(action, s.wind_curr);
  const int prev_side = tack_side(s.boat, s.wind_prev);
  const int new_side = tack_side(static_cast<int>(action), s.wind_curr);
  if (prev_side * new_side == -1) cost += 3;  // tack delay
  return cost;
}

SailingMap::SailingMap(int width, int height, std::vector<std::uint8_t> blocked_mask,
                       Cell start, Cell goal)
    : width_(width),
      height_(height),
      blocked_(std::move(blocked_mask)),
      start_(start),
      goal_(goal) {
  if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("SailingMap: empty grid");
  if (blocked_.size() != static_cast<std::size_t>(width_) * height_)
    throw std::invalid_argument("SailingMap: blocked mask size mismatch");
  if (start_ == goal_) throw std::invalid_argument("SailingMap: start equals goal");
  if (!free_cell(start_.x, start_.y) || !free_cell(goal_.x, goal_.y))
    throw std::invalid_argument("SailingMap: start or goal blocked or out of bounds");

  exit_masks_.assign(blocked_.size(), 0);
  free_rank_.assign(blocked_.size(), -1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (blocked(x, y)) continue;
      free_rank_[static_cast<std::size_t>(y) * width_ + x] =
          static_cast<int>(free_cells_.size());
      free_cells_.push_back({x, y});
      std::uint8_t mask = 0;
      for (int d = 0; d < kNumDirections; ++d)
        if (free_cell(x + dir_dx(d), y + dir_dy(d))) mask |= static_cast<std::uint8_t>(1u << d);
      exit_masks_[static_cast<std::size_t>(y) * width_ + x] = mask;
    }
  }
}

bool SailingMap::goal_reachable() const {
  std::vector<std::uint8_t> seen(blocked_.size(), 0);
  std::deque<Cell> queue{start_};
  seen[static_cast<std::size_t>(start_.y) * width_ + start_.x] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == goal_) return true;
    const std::uint8_t mask = exit_mask(c.x, c.y);
    for (int d = 0; d < kNumDirections; ++d) {
      if (!(mask & (1u << d))) continue;
      const Cell n{c.x + dir_dx(d), c.y + dir_dy(d)};
      auto& flag = seen[static_cast<std::size_t>(n.y) * width_ + n.x];
      if (!flag) {
        flag = 1;
        queue.push_back(n);
      }
    }
  }
  return false;
}

std::string SailingMap::to_text() const {
  std::ostringstream os;
  os << width_ << ' ' << height_ << '\n';
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      char c = blocked(x, y) ? '#' : '.';
      if (Cell{x, y} == start_) c = 'S';
      if (Cell{x, y} == goal_) c = 'G';
      os << c;
    }
    os << '\n';
  }
  return os.str();
}

SailingMap SailingMap::from_text(const std::string& text) {
  std::istringstream is(text);
  int width = 0, height = 0;
  if (!(is >> width >> height)) throw std::invalid_argument("SailingMap: bad header");
  std::string line;
  std::getline(is, line);
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(width) * height, 0);
  Cell start{-1, -1}, goal{-1, -1};
  for (int y = 0; y < height; ++y) {
    if (!std::getline(is, line) || static_cast<int>(line.size()) < width)
      throw std::invalid_argument("SailingMap: truncated row " + std::to_string(y));
    for (int x = 0; x < width; ++x) {
      switch (line[static_cast<std::size_t>(x)]) {
        case '.': break;
        case '#': blocked[static_cast<std::size_t>(y) * width + x] = 1; break;
        case 'S':
          if (start.x >= 0) throw std::invalid_argument("SailingMap: duplicate start");
          start = {x, y};
          break;
        case 'G':
          if (goal.x >= 0) throw std::invalid_argument("SailingMap: duplicate goal");
          goal = {x, y};
          break;
        default: throw std::invalid_argument("SailingMap: bad cell character");
      }
    }
  }
  if (start.x < 0 || goal.x < 0)
    throw std::invalid_argument("SailingMap: missing start or goal");
  return SailingMap(width, height, std::move(blocked), start, goal);
}

void SailingMap::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("SailingMap::save: cannot open " + path);
  os << to_text();
  if (!os) throw std::runtime_error("SailingMap::save: write failed for " + path);
}

SailingMap SailingMap::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("SailingMap::load: cannot open " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return from_text(buffer.str());
}

void valid_actions(const SailingState& s, const SailingMap& map, ActionList& out) {
  out.clear();
  const std::uint8_t mask = valid_action_mask(s, map);
  for (int d = 0; d < kNumDirections; ++d)
    if (mask & (1u << d)) out.push_back(static_cast<Action>(d));
}

SailingModel::SailingModel(std::shared_ptr<const SailingMap> map, double discount)
    : map_(std::move(map)), discount_(discount), trap_penalty_(kMaxCost / (1.0 - discount)) {
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("SailingModel: discount must be in [0,1)");
}

StepOutcome<SailingState> SailingModel::step(const SailingState& s, Action a, Rng& rng) const {
  if (a < 0 || a >= kNumDirections || !(valid_action_mask(s, *map_) & (1u << a)))
    throw std::invalid_argument("SailingModel::step: invalid action");
  const int cost = move_cost(s, a);
  SailingState next;
  next.x = static_cast<std::int8_t>(s.x + dir_dx(a));
  next.y = static_cast<std::int8_t>(s.y + dir_dy(a));
  next.boat = static_cast<std::int8_t>(a);
  next.wind_prev = s.wind_curr;
  // The wind keeps, backs or veers with probability 1/3 each.
  const int delta = static_cast<int>(rng.uniform_int(3)) - 1;
  next.wind_curr = static_cast<std::int8_t>(rotate(s.wind_curr, delta));
  double reward = -static_cast<double>(cost);
  const bool at_goal = next.x == map_->goal().x && next.y == map_->goal().y;
  if (!at_goal && trapped(next, *map_)) reward -= trap_penalty_;
  return {next, reward};
}

namespace {

/// Orders directions by closeness to the bearing (x, y) -> goal using exact
/// integer arithmetic: compares cos(angle) via cross-multiplied squares.
/// Returns true if direction `a` is strictly closer, or equally close and on
/// the clockwise side of the bearing.
bool closer_to_bearing(int a, int b, long long gx, long long gy) {
  const long long dots[2] = {dir_dx(a) * gx + dir_dy(a) * gy,
                             dir_dx(b) * gx + dir_dy(b) * gy};
  const long long norms[2] = {
      static_cast<long long>(dir_dx(a) * dir_dx(a) + dir_dy(a) * dir_dy(a)),
      static_cast<long long>(dir_dx(b) * dir_dx(b) + dir_dy(b) * dir_dy(b))};
  // Compare dots[0]/sqrt(norms[0]) vs dots[1]/sqrt(norms[1]).
  int cmp;  // 1: a closer, -1: b closer, 0: equal angle
  if (dots[0] >= 0 && dots[1] < 0) {
    cmp = 1;
  } else if (dots[0] < 0 && dots[1] >= 0) {
    cmp = -1;
  } else {
    const long long lhs = dots[0] * dots[0] * norms[1];
    const long long rhs = dots[1] * dots[1] * norms[0];
    if (lhs == rhs) cmp = 0;
    else if (dots[0] >= 0) cmp = lhs > rhs ? 1 : -1;
    else cmp = lhs < rhs ? 1 : -1;
  }
  if (cmp != 0) return cmp > 0;
  // Equal angular distance: prefer the clockwise side of the bearing.
  const long long cross_a = gx * dir_dy(a) - gy * dir_dx(a);
  return cross_a > 0;
}

}  // namespace

Action sail_towards_goal(const SailingState& s, const SailingMap& map) {
  const std::uint8_t mask = valid_action_mask(s, map);
  if (mask == 0) throw std::domain_error("sail_towards_goal: trapped state");
  const long long gx = map.goal().x - s.x;
  const long long gy = map.goal().y - s.y;
  int best = -1;
  for (int d = 0; d < kNumDirections; ++d) {
    if (!(mask & (1u << d))) continue;
    if (best < 0 || closer_to_bearing(d, best, gx, gy)) best = d;
  }
  return static_cast<Action>(best);
}

Prior stg_prior(const SailingState& s, Action a, const SailingMap& map, double discount) {
  if (!(valid_action_mask(s, map) & (1u << a)))
    throw std::invalid_argument("stg_prior: invalid action");
  const int cost = move_cost(s, a);
  const int nx = s.x + dir_dx(a);
  const int ny = s.y + dir_dy(a);
  const int d = std::max(std::abs(map.goal().x - nx), std::abs(map.goal().y - ny));
  const double ride = kMinCost * (1.0 - std::pow(discount, d + 1)) / (1.0 - discount);
  return {1, -(static_cast<double>(cost) + ride)};
}

Action stg_greedy(const SailingState& s, const SailingMap& map, double discount) {
  const std::uint8_t mask = valid_action_mask(s, map);
  if (mask == 0) throw std::domain_error("stg_greedy: trapped state");
  Action best = -1;
  double best_q = 0.0;
  for (int d = 0; d < kNumDirections; ++d) {
    if (!(mask & (1u << d))) continue;
    const double q = stg_prior(s, static_cast<Action>(d), map, discount).q;
    if (best < 0 || q > best_q) {
      best = static_cast<Action>(d);
      best_q = q;
    }
  }
  return best;
}

StgGreedyPolicy::StgGreedyPolicy(std::shared_ptr<const SailingMap> map, double discount)
    : map_(std::move(map)), discount_(discount) {
  // The rollout hot path cannot afford a pow() per action; tabulate the
  // all-winds-favourable ride cost by Chebyshev distance once.
  const int max_d = std::max(map_->width(), map_->height()) + 1;
  ride_.resize(static_cast<std::size_t>(max_d) + 1);
  for (int d = 0; d <= max_d; ++d)
    ride_[static_cast<std::size_t>(d)] =
        kMinCost * (1.0 - std::pow(discount, d + 1)) / (1.0 - discount);
}

Action StgGreedyPolicy::sample_impl(const SailingState& s) const {
  const std::uint8_t mask = valid_action_mask(s, *map_);
  if (mask == 0) throw std::domain_error("stg_greedy: trapped state");
  Action best = -1;
  double best_cost = 0.0;
  for (int d = 0; d < kNumDirections; ++d) {
    if (!(mask & (1u << d))) continue;
    const int nx = s.x + dir_dx(d);
    const int ny = s.y + dir_dy(d);
    const int dist = std::max(std::abs(map_->goal().x - nx), std::abs(map_->goal().y - ny));
    const double cost = static_cast<double>(move_cost(s, static_cast<Action>(d))) +
                        ride_[static_cast<std::size_t>(dist)];
    if (best < 0 || cost < best_cost) {
      best = static_cast<Action>(d);
      best_cost = cost;
    }
  }
  return best;
}

GenerateMapResult generate_map(int width, int height, double block_probability, Cell start,
                               Cell goal, Rng& rng, int max_rejections) {
  if (!(block_probability >= 0.0 && block_probability < 1.0))
    throw std::invalid_argument("generate_map: p must be in [0,1)");
  int rejections = 0;
  for (;;) {
    std::vector<std::uint8_t> blocked(static_cast<std::size_t>(width) * height, 0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (Cell{x, y} == start || Cell{x, y} == goal) continue;
        if (rng.uniform01() < block_probability)
          blocked[static_cast<std::size_t>(y) * width + x] = 1;
      }
    }
    auto map = std::make_shared<SailingMap>(width, height, std::move(blocked), start, goal);
    if (map->goal_reachable()) return {std::move(map), rejections};
    if (++rejections > max_rejections)
      throw std::runtime_error("generate_map: exceeded rejection cap of " +
                               std::to_string(max_rejections));
  }
}

TabularMdp to_tabular(const SailingSpace& space, double discount) {
  const SailingMap& map = space.map();
  const StateIndex n = space.num_states();
  const Action k = kNumDirections;
  const double trap_penalty = kMaxCost / (1.0 - discount);
  const std::size_t rows = static_cast<std::size_t>(n) * k;

  std::vector<std::uint8_t> terminal(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> row_ptr(rows + 1, 0);

  // Pass 1: terminal mask and row sizes.
  for (StateIndex i = 0; i < n; ++i) {
    const SailingState s = space.state(i);
    const bool at_goal = s.x == map.goal().x && s.y == map.goal().y;
    const std::uint8_t mask = valid_action_mask(s, map);
    if (at_goal || mask == 0) {
      terminal[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    for (int d = 0; d < kNumDirections; ++d)
      if (mask & (1u << d))
        row_ptr[static_cast<std::size_t>(i) * k + d + 1] = 3;
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];

  const std::size_t total = static_cast<std::size_t>(row_ptr[rows]);
  std::vector<StateIndex> next(total);
  std::vector<double> prob(total, 1.0 / 3.0);
  std::vector<double> reward(total);

  // Pass 2: fill.
  for (StateIndex i = 0; i < n; ++i) {
    if (terminal[static_cast<std::size_t>(i)]) continue;
    const SailingState s = space.state(i);
    const std::uint8_t mask = valid_action_mask(s, map);
    for (int d = 0; d < kNumDirections; ++d) {
      if (!(mask & (1u << d))) continue;
      const int cost = move_cost(s, static_cast<Action>(d));
      SailingState base;
      base.x = static_cast<std::int8_t>(s.x + dir_dx(d));
      base.y = static_cast<std::int8_t>(s.y + dir_dy(d));
      base.boat = static_cast<std::int8_t>(d);
      base.wind_prev = s.wind_curr;
      auto offset = static_cast<std::size_t>(row_ptr[static_cast<std::size_t>(i) * k + d]);
      const bool at_goal = base.x == map.goal().x && base.y == map.goal().y;
      for (int delta = -1; delta <= 1; ++delta) {
        SailingState nxt = base;
        nxt.wind_curr = static_cast<std::int8_t>(rotate(s.wind_curr, delta));
        next[offset] = space.index(nxt);
        double r = -static_cast<double>(cost);
        if (!at_goal && trapped(nxt, map)) r -= trap_penalty;
        reward[offset] = r;
        ++offset;
      }
    }
  }
  return TabularMdp(n, k, discount, std::move(terminal), std::move(row_ptr), std::move(next),
                    std::move(prob), std::move(reward));
}

SailingState sample_start_state(const SailingMap& map, Rng& rng) {
  SailingState s;
  s.x = static_cast<std::int8_t>(map.start().x);
  s.y = static_cast<std::int8_t>(map.start().y);
  s.boat = static_cast<std::int8_t>(rng.uniform_int(8));
  s.wind_prev = static_cast<std::int8_t>(rng.uniform_int(8));
  s.wind_curr = static_cast<std::int8_t>(rng.uniform_int(8));
  return s;
}

}  // namespace mcplan::sailing
