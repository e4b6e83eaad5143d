#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcplan/mdp.hpp"
#include "mcplan/uct.hpp"

namespace mcplan {

enum class ExperimentDomain : std::uint8_t { Sailing, Sheep };

/// A heuristic selector token: "stg", "so:<p>" (StochasticOptimal.p),
/// "ga", or "uniform".
struct HeuristicChoice {
  enum class Kind : std::uint8_t { Stg, StochasticOptimal, Ga, Uniform } kind = Kind::Uniform;
  double p = 0.2;  // StochasticOptimal mixing weight

  static HeuristicChoice parse(const std::string& token);
  std::string to_string() const;
};

/// Parsed agent token. Bases: Random, Optimal, Heuristic (optionally
/// "Heuristic[<selector>]"), and the UCT family: UCT, UCT-I, UCT-S, UCT-IS,
/// UCT-Aux, UCT-Aux-I, UCT-Aux-S, UCT-Aux-IS.
struct AgentSpec {
  enum class Base : std::uint8_t { Random, Optimal, Heuristic, Uct } base = Base::Uct;
  bool use_prior = false;    // -I
  bool use_rollout = false;  // -S
  bool use_aux = false;      // -Aux
  std::optional<HeuristicChoice> heuristic_override;  // Heuristic[<selector>] only
  std::string name;  // the original token; the CSV agent id

  static AgentSpec parse(const std::string& token);
};

struct SailingParams {
  int width = 20;
  int height = 20;
  double block_probability = 0.4;
  // Start and goal default to (2, 2) and (width-3, height-3), 0-indexed.
  std::optional<std::array<int, 2>> start;
  std::optional<std::array<int, 2>> goal;
  std::string maps_dir;  // when set, load instance maps instead of generating
};

struct SheepDomainParams {
  std::string maze_file;  // empty: the built-in reference maze
  int flee_radius = 2;
  int shoot_range = 1;
  int min_ghost_sheep_distance = 3;
};

struct ExperimentSpec {
  ExperimentDomain domain = ExperimentDomain::Sailing;
  std::vector<std::string> agents;
  HeuristicChoice prior_heuristic;    // UCT-I role
  HeuristicChoice rollout_heuristic;  // UCT-S role
  HeuristicChoice aux_heuristic;      // UCT-Aux role
  HeuristicChoice policy_heuristic;   // bare Heuristic agent
  std::vector<int> budgets;
  int instances = 1;
  int trials_per_instance = 1;
  std::uint64_t root_seed = 1;
  double exploration_constant = 0.0;  // 0: domain default (700 sailing, 20 sheep)
  int horizon = 300;
  double discount = 0.99;
  int max_steps = 300;
  RecommendationRule recommendation = RecommendationRule::HighestQ;
  double solve_tolerance = 1e-4;  // exact-solver tolerance for agent policies
  std::string cache_dir;          // empty: MCPLAN_CACHE_DIR, else no caching
  SailingParams sailing;
  SheepDomainParams sheep;

  static ExperimentSpec from_json(const std::string& json_text);
  static ExperimentSpec from_json_file(const std::string& path);

  void validate() const;
  double effective_exploration_constant() const;
};

/// One (agent, instance, trial, budget) cell.
struct TrialRecord {
  std::string agent;
  int instance = 0;
  int trial = 0;
  int budget = 0;
  bool ok = true;
  double return_value = 0.0;
  int steps = 0;
  double mean_tree_nodes = 0.0;  // per search; 0 for policy agents
  double wall_ms = 0.0;
  std::string error;  // not serialized; error rows carry NaN returns
  /// Packed encoding of the start state the agent faced; not serialized.
  /// Equal digests across agents witness the paired-seed fairness property.
  std::uint64_t start_digest = 0;
};

/// Equality on everything reproducible (wall time excluded).
bool same_outcome(const TrialRecord& a, const TrialRecord& b);

struct RunCallbacks {
  /// Called after each finished cell, in execution order.
  std::function<void(const TrialRecord&)> on_record;
  /// When set, UCT cells run with a search log and report one
  /// SearchDiagnostics per episode step. Intended for small runs.
  std::function<void(const TrialRecord&, const std::vector<SearchDiagnostics>&)>
      on_search_log;
};

/// Runs every (agent, instance, trial, budget) cell of the spec. Cell
/// failures become error rows and never abort the batch. Records are
/// returned in canonical (agent, instance, trial, budget) order regardless
/// of execution order.
std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec,
                                        const RunCallbacks& callbacks = {});

struct AggregateRow {
  std::string agent;
  int budget = 0;
  double mean_return = 0.0;
  double sem = 0.0;  // NaN when fewer than 2 records in the cell
  double mean_nodes = 0.0;
  std::int64_t n = 0;
};

/// Per-(agent, budget) mean, standard error of the mean and mean tree
/// nodes over ok records, in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records);

struct HistogramResult {
  std::vector<std::int64_t> counts;  // one per bin over [0, 1]
  std::int64_t cells = 0;            // scored cells
  std::int64_t skipped_degenerate = 0;  // Optimal <= Random
  std::int64_t skipped_unmatched = 0;

  double mass(int first_bin, int last_bin) const;  // inclusive range, as fraction
  int mode() const;
};

/// Fig-6 style histogram: per matched (instance, trial, budget) cell the
/// heuristic's return is placed relative to Random (0) and Optimal (1);
/// scores outside [0, 1] land in the corresponding extreme bin.
HistogramResult histogram_heuristic(const std::vector<TrialRecord>& heuristic,
                                    const std::vector<TrialRecord>& random,
                                    const std::vector<TrialRecord>& optimal, int bins);

/// CSV schemas (decimal point '.', no thousands separators, final row
/// newline-terminated):
///   records:    agent,instance,trial,budget,return,steps,tree_nodes,wall_ms
///   aggregates: agent,budget,mean_return,sem,mean_nodes,n
void write_records_csv(const std::vector<TrialRecord>& records, std::ostream& os);
std::vector<TrialRecord> parse_records_csv(std::istream& is);
void write_aggregates_csv(const std::vector<AggregateRow>& rows, std::ostream& os);
std::vector<AggregateRow> parse_aggregates_csv(std::istream& is);
void write_histogram_csv(const HistogramResult& hist, std::ostream& os);

/// Per-search diagnostics, one CSV row per search:
///   agent,instance,trial,budget,step,recommended,tree_nodes,rollouts,root_arms
/// root_arms encodes the root table as |-separated `action[*]:n:q` entries
/// (the * marks auxiliary arms).
void write_search_log_header(std::ostream& os);
void write_search_log_rows(const TrialRecord& cell,
                           const std::vector<SearchDiagnostics>& log, std::ostream& os);

/// Sub-seed for a cell: splitmix64 chain over (instance, trial, agent-name
/// hash, budget), starting from the root seed.
std::uint64_t cell_seed(std::uint64_t root_seed, int instance, int trial,
                        const std::string& agent, int budget);
/// Sub-seed for the per-(instance) map and the per-(instance, trial) start
/// state; agent-independent so that all agents face identical cells.
std::uint64_t instance_seed(std::uint64_t root_seed, int instance);
std::uint64_t start_seed(std::uint64_t root_seed, int instance, int trial);

}  // namespace mcplan
