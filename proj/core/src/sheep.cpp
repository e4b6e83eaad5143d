#include "mcplan/sheep.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mcplan::sheep {

namespace {
// Move deltas indexed by {no_move, N, S, E, W}.
constexpr int kMoveDx[5] = {0, 0, 0, 1, -1};
constexpr int kMoveDy[5] = {0, -1, 1, 0, 0};
constexpr int kUnreachable = std::numeric_limits<std::int16_t>::max();
}  // namespace

Maze::Maze(int width, int height, std::vector<std::uint8_t> walls, int pen_cell)
    : width_(width), height_(height), walls_(std::move(walls)) {
  if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("Maze: empty grid");
  if (walls_.size() != static_cast<std::size_t>(width_) * height_)
    throw std::invalid_argument("Maze: wall mask size mismatch");

  rank_.assign(walls_.size(), -1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (!wall(x, y)) {
        rank_[static_cast<std::size_t>(y) * width_ + x] =
            static_cast<int>(free_cells_.size());
        free_cells_.push_back(y * width_ + x);
      }
  if (free_cells_.size() < 6) throw std::invalid_argument("Maze: too few free cells");
  if (free_cells_.size() > 127) throw std::invalid_argument("Maze: more than 127 free cells");

  pen_rank_ = pen_cell >= 0 ? rank_[static_cast<std::size_t>(pen_cell)] : -1;
  if (pen_rank_ < 0) throw std::invalid_argument("Maze: missing or blocked pen cell");

  const int f = num_free();
  neighbors_.assign(static_cast<std::size_t>(f) * 5, -1);
  for (int r = 0; r < f; ++r) {
    const auto [x, y] = cell_of(r);
    for (int d = 0; d < 5; ++d) {
      const int nx = x + kMoveDx[d], ny = y + kMoveDy[d];
      neighbors_[static_cast<std::size_t>(r) * 5 + d] =
          wall(nx, ny) ? -1 : static_cast<std::int16_t>(rank_at(nx, ny));
    }
  }

  // All-pairs shortest paths by BFS from each free cell.
  dist_.assign(static_cast<std::size_t>(f) * f, kUnreachable);
  std::deque<int> queue;
  for (int src = 0; src < f; ++src) {
    auto* row = &dist_[static_cast<std::size_t>(src) * f];
    row[src] = 0;
    queue.clear();
    queue.push_back(src);
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      for (int d = 1; d < 5; ++d) {
        const int n = neighbor(c, d);
        if (n >= 0 && row[n] == kUnreachable) {
          row[n] = static_cast<std::int16_t>(row[c] + 1);
          queue.push_back(n);
        }
      }
    }
    for (int dst = 0; dst < f; ++dst)
      if (row[dst] == kUnreachable)
        throw std::invalid_argument("Maze: free cells are not fully connected");
  }
}

Maze Maze::from_text(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("Maze: empty text");
  const int width = static_cast<int>(rows[0].size());
  const int height = static_cast<int>(rows.size());
  std::vector<std::uint8_t> walls(static_cast<std::size_t>(width) * height, 0);
  int pen_cell = -1;
  struct RawMarkers {
    int shepherd = -1, dog = -1, sheep = -1;
    std::vector<int> ghosts;
  } raw;
  for (int y = 0; y < height; ++y) {
    if (static_cast<int>(rows[static_cast<std::size_t>(y)].size()) != width)
      throw std::invalid_argument("Maze: ragged rows");
    for (int x = 0; x < width; ++x) {
      const char c = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      const int cell = y * width + x;
      switch (c) {
        case '.': break;
        case '#': walls[static_cast<std::size_t>(cell)] = 1; break;
        case 'P':
          if (pen_cell >= 0) throw std::invalid_argument("Maze: duplicate pen");
          pen_cell = cell;
          break;
        case '1': raw.shepherd = cell; break;
        case '2': raw.dog = cell; break;
        case 's': raw.sheep = cell; break;
        case 'g': raw.ghosts.push_back(cell); break;
        default: throw std::invalid_argument("Maze: bad cell character");
      }
    }
  }
  if (raw.shepherd < 0 || raw.dog < 0 || raw.sheep < 0 || raw.ghosts.size() != 2)
    throw std::invalid_argument("Maze: need markers 1, 2, s and exactly two g");
  Maze maze(width, height, std::move(walls), pen_cell);
  maze.markers_.shepherd = maze.rank_[static_cast<std::size_t>(raw.shepherd)];
  maze.markers_.dog = maze.rank_[static_cast<std::size_t>(raw.dog)];
  maze.markers_.sheep = maze.rank_[static_cast<std::size_t>(raw.sheep)];
  maze.markers_.ghosts = {maze.rank_[static_cast<std::size_t>(raw.ghosts[0])],
                          maze.rank_[static_cast<std::size_t>(raw.ghosts[1])]};
  return maze;
}

Maze Maze::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("Maze::load: cannot open " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return from_text(buffer.str());
}

std::string Maze::to_text() const {
  std::string out;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      char c = wall(x, y) ? '#' : '.';
      const int r = rank_at(x, y);
      if (r >= 0) {
        if (r == pen_rank_) c = 'P';
        if (r == markers_.shepherd) c = '1';
        if (r == markers_.dog) c = '2';
        if (r == markers_.sheep) c = 's';
        if (r == markers_.ghosts[0] || r == markers_.ghosts[1]) c = 'g';
      }
      out += c;
    }
    out += '\n';
  }
  return out;
}

namespace {

/// Tie set of candidate cells (stay + legal moves) optimizing `score`;
/// `maximize` picks the largest score, otherwise the smallest.
template <typename ScoreFn>
void best_moves(const Maze& maze, int from, bool maximize, ScoreFn score,
                std::vector<int>& out) {
  out.clear();
  int best = 0;
  bool first = true;
  for (int d = 0; d < 5; ++d) {
    const int c = maze.neighbor(from, d);
    if (c < 0) continue;
    const int v = score(c);
    if (first || (maximize ? v > best : v < best)) {
      best = v;
      out.clear();
      out.push_back(c);
      first = false;
    } else if (v == best) {
      out.push_back(c);
    }
  }
}

int player_move(const Maze& maze, int from, int part) {
  if (part < 1 || part > 4) return from;  // no_move and shoot keep position
  const int c = maze.neighbor(from, part);
  return c < 0 ? from : c;
}

void npc_candidates_impl(NpcKind kind, const SheepState& s, const Maze& maze,
                         const SheepParams& params, int shepherd, int dog,
                         std::vector<int>& out) {
  const int from = kind == NpcKind::Sheep
                       ? s.sheep
                       : s.ghost[kind == NpcKind::Ghost0 ? 0 : 1];
  const int player_dist =
      std::min(maze.distance(from, shepherd), maze.distance(from, dog));
  if (player_dist <= params.flee_radius) {
    best_moves(maze, from, /*maximize=*/true, [&](int c) {
      return std::min(maze.distance(c, shepherd), maze.distance(c, dog));
    }, out);
    return;
  }
  if (kind == NpcKind::Sheep) {
    const bool g0 = s.hp[0] > 0, g1 = s.hp[1] > 0;
    if (!g0 && !g1) {
      out.assign(1, from);  // nothing to run from
      return;
    }
    best_moves(maze, from, /*maximize=*/true, [&](int c) {
      int d = std::numeric_limits<int>::max();
      if (g0) d = std::min(d, maze.distance(c, s.ghost[0]));
      if (g1) d = std::min(d, maze.distance(c, s.ghost[1]));
      return d;
    }, out);
    return;
  }
  best_moves(maze, from, /*maximize=*/false,
             [&](int c) { return maze.distance(c, s.sheep); }, out);
}

int pick_uniform(const std::vector<int>& candidates, Rng& rng) {
  if (candidates.size() == 1) return candidates[0];
  return candidates[rng.uniform_int(candidates.size())];
}

}  // namespace

void npc_move_candidates(NpcKind kind, const SheepState& s, const Maze& maze,
                         const SheepParams& params, int shepherd, int dog,
                         std::vector<int>& out) {
  npc_candidates_impl(kind, s, maze, params, shepherd, dog, out);
}

int npc_move(NpcKind kind, const SheepState& s, const Maze& maze, const SheepParams& params,
             Rng& rng) {
  std::vector<int> candidates;
  npc_candidates_impl(kind, s, maze, params, s.shepherd, s.dog, candidates);
  return pick_uniform(candidates, rng);
}

StepOutcome<SheepState> sheep_step_events(const SheepState& s, Action a, const Maze& maze,
                                          const SheepParams& params, Rng& rng,
                                          StepEvents& events) {
  if (a < 0 || a >= kNumCompoundActions)
    throw std::domain_error("sheep_step: compound action out of range");
  if (s.cause != TerminalCause::None)
    throw std::domain_error("sheep_step: step from a terminal state");
  events = {};
  SheepState next = s;
  const int sp = shepherd_part(a);
  next.shepherd = static_cast<std::uint8_t>(player_move(maze, s.shepherd, sp));
  next.dog = static_cast<std::uint8_t>(player_move(maze, s.dog, dog_part(a)));

  double reward = 0.0;
  if (sp == kShoot) {
    int target = -1, best = params.shoot_range + 1;
    for (int i = 0; i < 2; ++i) {
      if (next.hp[static_cast<std::size_t>(i)] == 0) continue;
      const int d = maze.distance(next.shepherd, next.ghost[static_cast<std::size_t>(i)]);
      if (d < best) {
        best = d;
        target = i;
      }
    }
    if (target >= 0) {
      auto& hp = next.hp[static_cast<std::size_t>(target)];
      --hp;
      if (hp == 0) {
        ++events.ghost_deaths;
        reward += params.ghost_kill_reward;
      }
    }
  }

  std::vector<int> candidates;
  npc_candidates_impl(NpcKind::Sheep, next, maze, params, next.shepherd, next.dog,
                      candidates);
  next.sheep = static_cast<std::uint8_t>(pick_uniform(candidates, rng));
  for (int i = 0; i < 2; ++i) {
    if (next.hp[static_cast<std::size_t>(i)] == 0) continue;
    npc_candidates_impl(i == 0 ? NpcKind::Ghost0 : NpcKind::Ghost1, next, maze, params,
                        next.shepherd, next.dog, candidates);
    next.ghost[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(pick_uniform(candidates, rng));
  }

  events.penned = next.sheep == maze.pen();
  events.killed = (next.hp[0] > 0 && next.ghost[0] == next.sheep) ||
                  (next.hp[1] > 0 && next.ghost[1] == next.sheep);
  if (events.penned) reward += params.pen_reward;
  if (events.killed) reward += params.sheep_killed_penalty;
  if (events.killed) next.cause = TerminalCause::SheepKilled;
  else if (events.penned) next.cause = TerminalCause::SheepPenned;
  return {next, reward};
}

SheepModel::SheepModel(std::shared_ptr<const Maze> maze, double discount, SheepParams params)
    : maze_(std::move(maze)), discount_(discount), params_(params) {
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("SheepModel: discount must be in [0,1)");
  for (Action a = 0; a < kNumCompoundActions; ++a) all_actions_.push_back(a);
}

StepOutcome<SheepState> SheepModel::step(const SheepState& s, Action a, Rng& rng) const {
  StepEvents events;
  return sheep_step_events(s, a, *maze_, params_, rng, events);
}

namespace {

struct SubtaskIndexer {
  int f;  // free cells
  StateIndex sheep_index(int sh, int dg, int shp) const {
    return static_cast<StateIndex>((sh * f + dg) * f + shp);
  }
  StateIndex ghost_index(int sh, int dg, int g, int hp) const {
    return static_cast<StateIndex>(((sh * f + dg) * f + g) * 3 + hp);
  }
};

/// Sheep-only movement rule inside the sheep subtask: flee the players
/// within the radius, otherwise hold position (no ghosts exist there).
void subtask_sheep_moves(const Maze& maze, const SheepParams& params, int shp, int sh,
                         int dg, std::vector<int>& out) {
  const int player_dist = std::min(maze.distance(shp, sh), maze.distance(shp, dg));
  if (player_dist > params.flee_radius) {
    out.assign(1, shp);
    return;
  }
  best_moves(maze, shp, /*maximize=*/true, [&](int c) {
    return std::min(maze.distance(c, sh), maze.distance(c, dg));
  }, out);
}

/// Ghost movement in the ghost subtask: flee the players within the radius,
/// otherwise hold position (no sheep to chase there).
void subtask_ghost_moves(const Maze& maze, const SheepParams& params, int g, int sh, int dg,
                         std::vector<int>& out) {
  const int player_dist = std::min(maze.distance(g, sh), maze.distance(g, dg));
  if (player_dist > params.flee_radius) {
    out.assign(1, g);
    return;
  }
  best_moves(maze, g, /*maximize=*/true, [&](int c) {
    return std::min(maze.distance(c, sh), maze.distance(c, dg));
  }, out);
}

}  // namespace

TabularMdp build_subtask_mdp(const Maze& maze, SubtaskKind kind, double discount,
                             const SheepParams& params) {
  const int f = maze.num_free();
  const SubtaskIndexer ix{f};
  const StateIndex n = kind == SubtaskKind::Sheep
                           ? static_cast<StateIndex>(f) * f * f
                           : static_cast<StateIndex>(f) * f * f * 3;
  const Action k = kNumCompoundActions;
  const std::size_t rows = static_cast<std::size_t>(n) * k;

  std::vector<std::uint8_t> terminal(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> row_ptr(rows + 1, 0);

  std::vector<int> moves;
  // Pass 1: terminal flags and row sizes.
  for (StateIndex i = 0; i < n; ++i) {
    int sh, dg, npc, hp = 1;
    if (kind == SubtaskKind::Sheep) {
      npc = i % f;
      dg = (i / f) % f;
      sh = i / (f * f);
      if (npc == maze.pen()) {
        terminal[static_cast<std::size_t>(i)] = 1;
        continue;
      }
    } else {
      hp = i % 3;
      npc = (i / 3) % f;
      dg = (i / (3 * f)) % f;
      sh = i / (3 * f * f);
      if (hp == 0) {
        terminal[static_cast<std::size_t>(i)] = 1;
        continue;
      }
    }
    for (Action a = 0; a < k; ++a) {
      const int sp = shepherd_part(a);
      const int sh2 = player_move(maze, sh, sp);
      const int dg2 = player_move(maze, dg, dog_part(a));
      std::size_t count;
      if (kind == SubtaskKind::Sheep) {
        subtask_sheep_moves(maze, params, npc, sh2, dg2, moves);
        count = moves.size();
      } else {
        const bool killshot = sp == kShoot && hp == 1 &&
                              maze.distance(sh2, npc) <= params.shoot_range;
        if (killshot) {
          count = 1;
        } else {
          subtask_ghost_moves(maze, params, npc, sh2, dg2, moves);
          count = moves.size();
        }
      }
      row_ptr[static_cast<std::size_t>(i) * k + a + 1] = static_cast<std::int64_t>(count);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];

  const std::size_t total = static_cast<std::size_t>(row_ptr[rows]);
  std::vector<StateIndex> next(total);
  std::vector<double> prob(total), reward(total);

  // Pass 2: fill.
  for (StateIndex i = 0; i < n; ++i) {
    if (terminal[static_cast<std::size_t>(i)]) continue;
    int sh, dg, npc, hp = 1;
    if (kind == SubtaskKind::Sheep) {
      npc = i % f;
      dg = (i / f) % f;
      sh = i / (f * f);
    } else {
      hp = i % 3;
      npc = (i / 3) % f;
      dg = (i / (3 * f)) % f;
      sh = i / (3 * f * f);
    }
    for (Action a = 0; a < k; ++a) {
      const int sp = shepherd_part(a);
      const int sh2 = player_move(maze, sh, sp);
      const int dg2 = player_move(maze, dg, dog_part(a));
      auto offset = static_cast<std::size_t>(row_ptr[static_cast<std::size_t>(i) * k + a]);
      if (kind == SubtaskKind::Sheep) {
        subtask_sheep_moves(maze, params, npc, sh2, dg2, moves);
        const double p = 1.0 / static_cast<double>(moves.size());
        for (int c : moves) {
          next[offset] = ix.sheep_index(sh2, dg2, c);
          prob[offset] = p;
          reward[offset] = c == maze.pen() ? params.pen_reward : 0.0;
          ++offset;
        }
      } else {
        const bool hit = sp == kShoot && maze.distance(sh2, npc) <= params.shoot_range;
        const int hp2 = hit ? hp - 1 : hp;
        if (hp2 == 0) {
          next[offset] = ix.ghost_index(sh2, dg2, npc, 0);
          prob[offset] = 1.0;
          reward[offset] = params.ghost_kill_reward;
        } else {
          subtask_ghost_moves(maze, params, npc, sh2, dg2, moves);
          const double p = 1.0 / static_cast<double>(moves.size());
          for (int c : moves) {
            next[offset] = ix.ghost_index(sh2, dg2, c, hp2);
            prob[offset] = p;
            reward[offset] = 0.0;
            ++offset;
          }
        }
      }
    }
  }
  return TabularMdp(n, k, discount, std::move(terminal), std::move(row_ptr), std::move(next),
                    std::move(prob), std::move(reward));
}

SubtaskSet build_subtasks(std::shared_ptr<const Maze> maze, double discount,
                          const SheepParams& params, const SolveSettings& solve_settings) {
  SubtaskSet set;
  set.maze = maze;
  set.params = params;
  {
    const TabularMdp mdp = build_subtask_mdp(*maze, SubtaskKind::Sheep, discount, params);
    auto solved = std::make_shared<SolveResult>(value_iteration(mdp, solve_settings));
    set.models[0] = {1, SubtaskKind::Sheep, mdp.num_states(), std::move(solved)};
  }
  {
    // One solve covers both ghost subtasks: their MDPs are identical.
    const TabularMdp mdp = build_subtask_mdp(*maze, SubtaskKind::Ghost, discount, params);
    auto solved = std::make_shared<SolveResult>(value_iteration(mdp, solve_settings));
    set.models[1] = {2, SubtaskKind::Ghost, mdp.num_states(), solved};
    set.models[2] = {3, SubtaskKind::Ghost, mdp.num_states(), std::move(solved)};
  }
  return set;
}

StateIndex SubtaskSet::project(int subtask, const SheepState& s) const {
  const SubtaskIndexer ix{maze->num_free()};
  if (subtask == 0) return ix.sheep_index(s.shepherd, s.dog, s.sheep);
  const int g = subtask - 1;
  return ix.ghost_index(s.shepherd, s.dog, s.ghost[static_cast<std::size_t>(g)],
                        s.hp[static_cast<std::size_t>(g)]);
}

double SubtaskSet::subtask_q(int subtask, const SheepState& s, Action a) const {
  if (subtask == 0) {
    if (s.sheep == maze->pen()) return 0.0;
  } else if (s.hp[static_cast<std::size_t>(subtask - 1)] == 0) {
    return 0.0;
  }
  return models[static_cast<std::size_t>(subtask)].solution->q_at(project(subtask, s), a);
}

double goal_averaging(const SheepState& s, Action a, const SubtaskSet& subtasks) {
  return (subtasks.subtask_q(0, s, a) + subtasks.subtask_q(1, s, a) +
          subtasks.subtask_q(2, s, a)) /
         3.0;
}

Action GoalAveragingPolicy::best_action(const SheepState& s) const {
  Action best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (Action a = 0; a < kNumCompoundActions; ++a) {
    const double q = goal_averaging(s, a, *subtasks_);
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

Prior ga_prior(const SheepState& s, Action a, const SubtaskSet& subtasks) {
  return {1, goal_averaging(s, a, subtasks)};
}

SheepState sample_start_state(const Maze& maze, Rng& rng, int min_ghost_sheep_distance) {
  const int f = maze.num_free();
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::array<int, 5> cells;
    bool distinct = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      cells[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(f)));
      for (std::size_t j = 0; j < i; ++j)
        if (cells[j] == cells[i]) distinct = false;
    }
    if (!distinct) continue;
    SheepState s;
    s.shepherd = static_cast<std::uint8_t>(cells[0]);
    s.dog = static_cast<std::uint8_t>(cells[1]);
    s.sheep = static_cast<std::uint8_t>(cells[2]);
    s.ghost = {static_cast<std::uint8_t>(cells[3]), static_cast<std::uint8_t>(cells[4])};
    s.hp = {2, 2};
    if (s.sheep == maze.pen()) continue;
    if (maze.distance(s.ghost[0], s.sheep) < min_ghost_sheep_distance) continue;
    if (maze.distance(s.ghost[1], s.sheep) < min_ghost_sheep_distance) continue;
    return s;
  }
  throw std::runtime_error("sample_start_state: rejection cap exceeded");
}

SheepState marker_start_state(const Maze& maze) {
  const auto& m = maze.markers();
  SheepState s;
  s.shepherd = static_cast<std::uint8_t>(m.shepherd);
  s.dog = static_cast<std::uint8_t>(m.dog);
  s.sheep = static_cast<std::uint8_t>(m.sheep);
  s.ghost = {static_cast<std::uint8_t>(m.ghosts[0]), static_cast<std::uint8_t>(m.ghosts[1])};
  s.hp = {2, 2};
  return s;
}

const std::string& reference_maze_text() {
  static const std::string maze =
      "#########\n"
      "#P......#\n"
      "#.##.##.#\n"
      "#...s...#\n"
      "#.......#\n"
      "#...#...#\n"
      "#.##.##g#\n"
      "#1.2...g#\n"
      "#########\n";
  return maze;
}

}  // namespace mcplan::sheep
