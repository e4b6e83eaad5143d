#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/tabular.hpp"
#include "mcplan/value_iteration.hpp"

namespace mcplan::sheep {

/// 4-connected maze with a single pen cell. Distances between free cells
/// are shortest-path through free cells, precomputed at load.
class Maze {
 public:
  Maze(int width, int height, std::vector<std::uint8_t> walls, int pen_cell);

  static Maze from_text(const std::string& text);
  static Maze load(const std::string& path);
  std::string to_text() const;

  int width() const { return width_; }
  int height() const { return height_; }
  int num_free() const { return static_cast<int>(free_cells_.size()); }
  int pen() const { return pen_rank_; }  // free-cell rank of the pen

  bool wall(int x, int y) const {
    return x < 0 || x >= width_ || y < 0 || y >= height_ ||
           walls_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  int rank_at(int x, int y) const {
    return wall(x, y) ? -1 : rank_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::pair<int, int> cell_of(int rank) const {
    const int c = free_cells_[static_cast<std::size_t>(rank)];
    return {c % width_, c / width_};
  }

  /// Shortest-path distance between free-cell ranks.
  int distance(int a, int b) const {
    return dist_[static_cast<std::size_t>(a) * free_cells_.size() +
                 static_cast<std::size_t>(b)];
  }
  /// Rank after moving one step in direction d (0 stay, 1 N, 2 S, 3 E, 4 W);
  /// -1 if the move hits a wall.
  int neighbor(int rank, int d) const {
    return neighbors_[static_cast<std::size_t>(rank) * 5 + static_cast<std::size_t>(d)];
  }

  /// Start markers from the maze file: shepherd, dog, sheep, two ghosts.
  struct Markers {
    int shepherd = -1, dog = -1, sheep = -1;
    std::array<int, 2> ghosts{-1, -1};
  };
  const Markers& markers() const { return markers_; }

 private:
  int width_, height_;
  std::vector<std::uint8_t> walls_;
  int pen_rank_ = -1;
  std::vector<int> free_cells_;  // row-major cell ids
  std::vector<int> rank_;
  std::vector<std::int16_t> dist_;
  std::vector<std::int16_t> neighbors_;
  Markers markers_;
};

enum class TerminalCause : std::uint8_t { None = 0, SheepPenned = 1, SheepKilled = 2 };

struct SheepState {
  std::uint8_t shepherd = 0, dog = 0, sheep = 0;  // free-cell ranks
  std::array<std::uint8_t, 2> ghost{0, 0};
  std::array<std::uint8_t, 2> hp{2, 2};  // 0 means removed from play
  TerminalCause cause = TerminalCause::None;

  friend bool operator==(const SheepState&, const SheepState&) = default;

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(shepherd)) |
           (static_cast<std::uint64_t>(dog) << 7) |
           (static_cast<std::uint64_t>(sheep) << 14) |
           (static_cast<std::uint64_t>(ghost[0]) << 21) |
           (static_cast<std::uint64_t>(ghost[1]) << 28) |
           (static_cast<std::uint64_t>(hp[0]) << 35) |
           (static_cast<std::uint64_t>(hp[1]) << 37) |
           (static_cast<std::uint64_t>(cause) << 39);
  }
};

/// Compound action id in [0, 30): shepherd part (id / 5) over
/// {no_move, N, S, E, W, shoot}, dog part (id % 5) over {no_move, N, S, E, W}.
constexpr Action kNumCompoundActions = 30;
constexpr int shepherd_part(Action a) { return a / 5; }
constexpr int dog_part(Action a) { return a % 5; }
constexpr Action compound_action(int shepherd, int dog) {
  return static_cast<Action>(shepherd * 5 + dog);
}
constexpr int kShoot = 5;

struct SheepParams {
  int flee_radius = 2;   // NPCs run from players within this distance
  int shoot_range = 1;   // shepherd can hit a ghost within this distance
  double ghost_kill_reward = 5.0;
  double pen_reward = 10.0;
  double sheep_killed_penalty = -10.0;
};

enum class NpcKind : std::uint8_t { Sheep, Ghost0, Ghost1 };

/// Candidate cells an NPC may move to this step, i.e. the tie set of its
/// behavior rule evaluated against the given (post-move) player positions;
/// the actual move is uniform over these.
void npc_move_candidates(NpcKind kind, const SheepState& s, const Maze& maze,
                         const SheepParams& params, int shepherd, int dog,
                         std::vector<int>& out);

/// Samples the npc's move under the behavior rules, players at their
/// current in-state positions.
int npc_move(NpcKind kind, const SheepState& s, const Maze& maze, const SheepParams& params,
             Rng& rng);

/// Full two-ghost game. Players move simultaneously (blocked moves become
/// no_move), a shoot hits the nearest in-range ghost, then the sheep and the
/// ghosts move in that order; pen and kill checks run after all movement.
class SheepModel final : public GenerativeModel<SheepState> {
 public:
  SheepModel(std::shared_ptr<const Maze> maze, double discount, SheepParams params = {});

  double discount() const override { return discount_; }
  bool is_terminal(const SheepState& s) const override {
    return s.cause != TerminalCause::None;
  }
  void valid_actions(const SheepState&, ActionList& out) const override {
    out = all_actions_;
  }
  StepOutcome<SheepState> step(const SheepState& s, Action a, Rng& rng) const override;

  const Maze& maze() const { return *maze_; }
  const SheepParams& params() const { return params_; }

 private:
  std::shared_ptr<const Maze> maze_;
  double discount_;
  SheepParams params_;
  ActionList all_actions_;
};

enum class SubtaskKind : std::uint8_t { Sheep, Ghost };

/// Projected two-player one-NPC MDP, exactly solvable. The two ghost
/// subtasks share one solve: their dynamics are identical, only the
/// projected ghost differs.
struct SubtaskModel {
  int index = 0;  // 1-based, matching the m = 3 decomposition
  SubtaskKind kind = SubtaskKind::Sheep;
  StateIndex num_states = 0;
  std::shared_ptr<const SolveResult> solution;
};

struct SubtaskSet {
  std::shared_ptr<const Maze> maze;
  SheepParams params;
  std::array<SubtaskModel, 3> models;  // sheep, ghost 1, ghost 2

  StateIndex project(int subtask, const SheepState& s) const;
  /// Q_i(s_i, a); terminal projected states contribute 0.
  double subtask_q(int subtask, const SheepState& s, Action a) const;
};

/// The projected MDP of one subtask; exposed for oracle tests. States:
/// sheep subtask (shep * F + dog) * F + sheep, terminal when sheep is
/// penned; ghost subtask ((shep * F + dog) * F + ghost) * 3 + hp, terminal
/// at hp = 0.
TabularMdp build_subtask_mdp(const Maze& maze, SubtaskKind kind, double discount,
                             const SheepParams& params = {});

/// Builds and exactly solves all three subtasks.
SubtaskSet build_subtasks(std::shared_ptr<const Maze> maze, double discount,
                          const SheepParams& params = {},
                          const SolveSettings& solve_settings = {});

/// Q_GA(s, a): mean of the three subtask Q values at the projected states.
double goal_averaging(const SheepState& s, Action a, const SubtaskSet& subtasks);

/// pi_GA(s) = argmax_a Q_GA(s, a), ties to the lowest action id.
class GoalAveragingPolicy final : public Policy<SheepState> {
 public:
  explicit GoalAveragingPolicy(std::shared_ptr<const SubtaskSet> subtasks)
      : subtasks_(std::move(subtasks)) {}

  void action_distribution(const SheepState& s, ActionDistribution& out) const override {
    out.clear();
    out.push_back({best_action(s), 1.0});
  }
  Action sample(const SheepState& s, Rng&) const override { return best_action(s); }
  Action best_action(const SheepState& s) const;

 private:
  std::shared_ptr<const SubtaskSet> subtasks_;
};

Prior ga_prior(const SheepState& s, Action a, const SubtaskSet& subtasks);

class GaPrior final : public PriorValue<SheepState> {
 public:
  explicit GaPrior(std::shared_ptr<const SubtaskSet> subtasks)
      : subtasks_(std::move(subtasks)) {}
  Prior prior(const SheepState& s, Action a) const override {
    return ga_prior(s, a, *subtasks_);
  }

 private:
  std::shared_ptr<const SubtaskSet> subtasks_;
};

/// Per-step reward decomposition, exact: 5 * ghost deaths + 10 * penned
/// - 10 * killed.
struct StepEvents {
  int ghost_deaths = 0;
  bool penned = false;
  bool killed = false;
};

/// As SheepModel::step but also reporting the triggering events (test
/// support for the decomposition invariant).
StepOutcome<SheepState> sheep_step_events(const SheepState& s, Action a, const Maze& maze,
                                          const SheepParams& params, Rng& rng,
                                          StepEvents& events);

/// Random starting configuration: five distinct cells, sheep off the pen,
/// both ghosts at least min_ghost_sheep_distance from the sheep.
SheepState sample_start_state(const Maze& maze, Rng& rng, int min_ghost_sheep_distance = 3);

/// Start state from the maze file markers.
SheepState marker_start_state(const Maze& maze);

/// The 9x9 reference maze used by the experiment defaults.
const std::string& reference_maze_text();

}  // namespace mcplan::sheep

template <>
struct std::hash<mcplan::sheep::SheepState> {
  std::size_t operator()(const mcplan::sheep::SheepState& s) const noexcept {
    return std::size_t(mcplan::mix64(s.packed()));
  }
};
