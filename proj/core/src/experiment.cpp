#include "mcplan/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "mcplan/sailing.hpp"
#include "mcplan/sheep.hpp"
#include "mcplan/value_iteration.hpp"

namespace mcplan {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// tokens and spec parsing

HeuristicChoice HeuristicChoice::parse(const std::string& token) {
  HeuristicChoice out;
  if (token == "stg") {
    out.kind = Kind::Stg;
  } else if (token == "ga") {
    out.kind = Kind::Ga;
  } else if (token == "uniform") {
    out.kind = Kind::Uniform;
  } else if (token == "so" || token.rfind("so:", 0) == 0) {
    out.kind = Kind::StochasticOptimal;
    if (token.size() > 3) {
      out.p = std::strtod(token.c_str() + 3, nullptr);
      if (!(out.p >= 0.0 && out.p <= 1.0))
        throw std::invalid_argument("heuristic token: p out of [0,1] in '" + token + "'");
    }
  } else {
    throw std::invalid_argument("unknown heuristic token '" + token + "'");
  }
  return out;
}

std::string HeuristicChoice::to_string() const {
  switch (kind) {
    case Kind::Stg: return "stg";
    case Kind::Ga: return "ga";
    case Kind::Uniform: return "uniform";
    case Kind::StochasticOptimal: {
      char buf[32];
      auto r = std::to_chars(buf, buf + sizeof(buf), p);
      return "so:" + std::string(buf, r.ptr);
    }
  }
  return "uniform";
}

AgentSpec AgentSpec::parse(const std::string& token) {
  AgentSpec out;
  out.name = token;
  std::string base = token;
  if (auto open = token.find('['); open != std::string::npos) {
    if (token.back() != ']')
      throw std::invalid_argument("agent token '" + token + "': missing ']'");
    base = token.substr(0, open);
    out.heuristic_override =
        HeuristicChoice::parse(token.substr(open + 1, token.size() - open - 2));
    if (base != "Heuristic")
      throw std::invalid_argument("agent token '" + token +
                                  "': [..] override is only for Heuristic");
  }
  if (base == "Random") {
    out.base = Base::Random;
    // Random is uniform over valid actions; reuse the Heuristic machinery.
  } else if (base == "Optimal") {
    out.base = Base::Optimal;
  } else if (base == "Heuristic") {
    out.base = Base::Heuristic;
  } else if (base == "UCT") {
    out.base = Base::Uct;
  } else if (base == "UCT-I") {
    out.base = Base::Uct;
    out.use_prior = true;
  } else if (base == "UCT-S") {
    out.base = Base::Uct;
    out.use_rollout = true;
  } else if (base == "UCT-IS") {
    out.base = Base::Uct;
    out.use_prior = out.use_rollout = true;
  } else if (base == "UCT-Aux") {
    out.base = Base::Uct;
    out.use_aux = true;
  } else if (base == "UCT-Aux-I") {
    out.base = Base::Uct;
    out.use_aux = out.use_prior = true;
  } else if (base == "UCT-Aux-S") {
    out.base = Base::Uct;
    out.use_aux = out.use_rollout = true;
  } else if (base == "UCT-Aux-IS") {
    out.base = Base::Uct;
    out.use_aux = out.use_prior = out.use_rollout = true;
  } else {
    throw std::invalid_argument("unknown agent token '" + token + "'");
  }
  return out;
}

namespace {

HeuristicChoice choice_from_json(const json& j) {
  return HeuristicChoice::parse(j.get<std::string>());
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentSpec spec;
  const std::string domain = j.value("domain", "sailing");
  if (domain == "sailing") spec.domain = ExperimentDomain::Sailing;
  else if (domain == "sheep") spec.domain = ExperimentDomain::Sheep;
  else throw std::invalid_argument("spec: unknown domain '" + domain + "'");

  if (!j.contains("agents") || !j["agents"].is_array() || j["agents"].empty())
    throw std::invalid_argument("spec: 'agents' must be a non-empty array");
  for (const auto& a : j["agents"]) spec.agents.push_back(a.get<std::string>());

  const HeuristicChoice domain_default =
      spec.domain == ExperimentDomain::Sailing
          ? HeuristicChoice{HeuristicChoice::Kind::Stg, 0.2}
          : HeuristicChoice{HeuristicChoice::Kind::Ga, 0.2};
  spec.prior_heuristic = domain_default;
  spec.rollout_heuristic = domain_default;
  spec.aux_heuristic = domain_default;
  spec.policy_heuristic = domain_default;
  if (j.contains("heuristic")) {
    const auto& h = j["heuristic"];
    if (h.contains("prior")) spec.prior_heuristic = choice_from_json(h["prior"]);
    if (h.contains("rollout")) spec.rollout_heuristic = choice_from_json(h["rollout"]);
    if (h.contains("aux")) spec.aux_heuristic = choice_from_json(h["aux"]);
    if (h.contains("policy")) spec.policy_heuristic = choice_from_json(h["policy"]);
  }

  spec.budgets = j.value("budgets", std::vector<int>{});
  if (spec.budgets.empty())
    spec.budgets = spec.domain == ExperimentDomain::Sailing
                       ? std::vector<int>{250, 500, 1000, 2000, 4000, 8000, 16000}
                       : std::vector<int>{200, 500, 1000, 2000, 5000, 10000};
  spec.instances = j.value("instances", 1);
  spec.trials_per_instance = j.value("trials_per_instance", 1);
  spec.root_seed = j.value("root_seed", std::uint64_t{1});
  spec.exploration_constant = j.value("exploration_constant", 0.0);
  spec.horizon = j.value("horizon", 300);
  spec.discount = j.value("discount", 0.99);
  spec.max_steps = j.value("max_steps", 300);
  const std::string rec = j.value("recommendation", "highest_q");
  if (rec == "highest_q") spec.recommendation = RecommendationRule::HighestQ;
  else if (rec == "highest_n") spec.recommendation = RecommendationRule::HighestN;
  else throw std::invalid_argument("spec: unknown recommendation rule '" + rec + "'");
  spec.solve_tolerance = j.value("solve_tolerance", 1e-4);
  spec.cache_dir = j.value("cache_dir", std::string{});

  if (j.contains("sailing")) {
    const auto& s = j["sailing"];
    spec.sailing.width = s.value("width", spec.sailing.width);
    spec.sailing.height = s.value("height", spec.sailing.height);
    spec.sailing.block_probability =
        s.value("block_probability", spec.sailing.block_probability);
    if (s.contains("start")) spec.sailing.start = s["start"].get<std::array<int, 2>>();
    if (s.contains("goal")) spec.sailing.goal = s["goal"].get<std::array<int, 2>>();
    spec.sailing.maps_dir = s.value("maps_dir", std::string{});
  }
  if (j.contains("sheep")) {
    const auto& s = j["sheep"];
    spec.sheep.maze_file = s.value("maze_file", std::string{});
    spec.sheep.flee_radius = s.value("flee_radius", spec.sheep.flee_radius);
    spec.sheep.shoot_range = s.value("shoot_range", spec.sheep.shoot_range);
    spec.sheep.min_ghost_sheep_distance =
        s.value("min_ghost_sheep_distance", spec.sheep.min_ghost_sheep_distance);
  }
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open spec file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_json(buf.str());
}

double ExperimentSpec::effective_exploration_constant() const {
  if (exploration_constant > 0.0) return exploration_constant;
  // Domain defaults: an upper bound on the accumulated reward magnitude.
  return domain == ExperimentDomain::Sailing ? sailing::kMaxCost / (1.0 - discount) : 20.0;
}

void ExperimentSpec::validate() const {
  if (agents.empty()) throw std::invalid_argument("spec: no agents");
  for (const auto& token : agents) {
    const AgentSpec agent = AgentSpec::parse(token);
    if (token.find(',') != std::string::npos)
      throw std::invalid_argument("spec: agent token may not contain ','");
    const auto check_choice = [&](const HeuristicChoice& c, const char* role) {
      const bool sailing_domain = domain == ExperimentDomain::Sailing;
      if (sailing_domain && c.kind == HeuristicChoice::Kind::Ga)
        throw std::invalid_argument(std::string("spec: 'ga' is sheep-only (role ") + role +
                                    ")");
      if (!sailing_domain && (c.kind == HeuristicChoice::Kind::Stg ||
                              c.kind == HeuristicChoice::Kind::StochasticOptimal))
        throw std::invalid_argument(std::string("spec: '") + c.to_string() +
                                    "' is sailing-only (role " + role + ")");
    };
    if (agent.base == AgentSpec::Base::Optimal && domain == ExperimentDomain::Sheep)
      throw std::invalid_argument("spec: no Optimal agent for sheep (state space too large)");
    if (agent.base == AgentSpec::Base::Heuristic)
      check_choice(agent.heuristic_override.value_or(policy_heuristic), "policy");
    if (agent.base == AgentSpec::Base::Uct) {
      if (agent.use_prior) check_choice(prior_heuristic, "prior");
      if (agent.use_rollout) check_choice(rollout_heuristic, "rollout");
      if (agent.use_aux) check_choice(aux_heuristic, "aux");
    }
  }
  if (budgets.empty()) throw std::invalid_argument("spec: no budgets");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] < 1) throw std::invalid_argument("spec: budgets must be >= 1");
    if (i > 0 && budgets[i] <= budgets[i - 1])
      throw std::invalid_argument("spec: budgets must be strictly increasing");
  }
  if (instances < 1 || trials_per_instance < 1)
    throw std::invalid_argument("spec: instances and trials must be >= 1");
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("spec: discount must be in [0,1)");
  if (horizon < 1 || max_steps < 1)
    throw std::invalid_argument("spec: horizon and max_steps must be >= 1");
  if (!(solve_tolerance > 0.0)) throw std::invalid_argument("spec: bad solve tolerance");
  if (domain == ExperimentDomain::Sailing) {
    if (sailing.width < 3 || sailing.height < 3)
      throw std::invalid_argument("spec: sailing map too small");
    if (!(sailing.block_probability >= 0.0 && sailing.block_probability < 1.0))
      throw std::invalid_argument("spec: block probability out of [0,1)");
  }
}

// ---------------------------------------------------------------------------
// seeds

std::uint64_t cell_seed(std::uint64_t root_seed, int instance, int trial,
                        const std::string& agent, int budget) {
  return derive_seed(root_seed,
                     {static_cast<std::uint64_t>(instance), static_cast<std::uint64_t>(trial),
                      fnv1a64(agent), static_cast<std::uint64_t>(budget)});
}

std::uint64_t instance_seed(std::uint64_t root_seed, int instance) {
  return derive_seed(root_seed, {fnv1a64("map"), static_cast<std::uint64_t>(instance)});
}

std::uint64_t start_seed(std::uint64_t root_seed, int instance, int trial) {
  return derive_seed(root_seed, {fnv1a64("start"), static_cast<std::uint64_t>(instance),
                                 static_cast<std::uint64_t>(trial)});
}

// ---------------------------------------------------------------------------
// aggregation, histogram, CSV

bool same_outcome(const TrialRecord& a, const TrialRecord& b) {
  const auto bits = [](double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof(u));
    return u;
  };
  return a.agent == b.agent && a.instance == b.instance && a.trial == b.trial &&
         a.budget == b.budget && a.ok == b.ok &&
         bits(a.return_value) == bits(b.return_value) && a.steps == b.steps &&
         bits(a.mean_tree_nodes) == bits(b.mean_tree_nodes);
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records) {
  struct Cell {
    std::size_t row;
    std::vector<double> returns;
    double nodes_sum = 0.0;
  };
  std::map<std::pair<std::string, int>, Cell> cells;
  std::vector<AggregateRow> rows;
  for (const auto& r : records) {
    if (!r.ok) continue;
    auto [it, inserted] = cells.try_emplace({r.agent, r.budget});
    if (inserted) {
      it->second.row = rows.size();
      rows.push_back({r.agent, r.budget, 0.0, 0.0, 0.0, 0});
    }
    it->second.returns.push_back(r.return_value);
    it->second.nodes_sum += r.mean_tree_nodes;
  }
  for (const auto& [key, cell] : cells) {
    AggregateRow& row = rows[cell.row];
    const auto n = static_cast<double>(cell.returns.size());
    row.n = static_cast<std::int64_t>(cell.returns.size());
    double mean = 0.0;
    for (double x : cell.returns) mean += x;
    mean /= n;
    row.mean_return = mean;
    if (row.n >= 2) {
      double ss = 0.0;
      for (double x : cell.returns) ss += (x - mean) * (x - mean);
      row.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    } else {
      row.sem = std::numeric_limits<double>::quiet_NaN();
    }
    row.mean_nodes = cell.nodes_sum / n;
  }
  return rows;
}

double HistogramResult::mass(int first_bin, int last_bin) const {
  if (cells == 0) return 0.0;
  std::int64_t sum = 0;
  for (int b = first_bin; b <= last_bin; ++b) sum += counts[static_cast<std::size_t>(b)];
  return static_cast<double>(sum) / static_cast<double>(cells);
}

int HistogramResult::mode() const {
  int best = 0;
  for (int b = 1; b < static_cast<int>(counts.size()); ++b)
    if (counts[static_cast<std::size_t>(b)] > counts[static_cast<std::size_t>(best)]) best = b;
  return best;
}

HistogramResult histogram_heuristic(const std::vector<TrialRecord>& heuristic,
                                    const std::vector<TrialRecord>& random,
                                    const std::vector<TrialRecord>& optimal, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram_heuristic: bins must be >= 1");
  HistogramResult out;
  out.counts.assign(static_cast<std::size_t>(bins), 0);
  using Key = std::tuple<int, int, int>;
  std::map<Key, double> rand_by_cell, opt_by_cell;
  for (const auto& r : random)
    if (r.ok) rand_by_cell[{r.instance, r.trial, r.budget}] = r.return_value;
  for (const auto& r : optimal)
    if (r.ok) opt_by_cell[{r.instance, r.trial, r.budget}] = r.return_value;
  for (const auto& h : heuristic) {
    if (!h.ok) continue;
    const Key key{h.instance, h.trial, h.budget};
    const auto ri = rand_by_cell.find(key);
    const auto oi = opt_by_cell.find(key);
    if (ri == rand_by_cell.end() || oi == opt_by_cell.end()) {
      ++out.skipped_unmatched;
      continue;
    }
    const double denom = oi->second - ri->second;
    if (!(denom > 0.0)) {
      ++out.skipped_degenerate;
      continue;
    }
    double score = (h.return_value - ri->second) / denom;
    score = std::clamp(score, 0.0, 1.0);
    int bin = static_cast<int>(score * bins);
    bin = std::min(bin, bins - 1);
    ++out.counts[static_cast<std::size_t>(bin)];
    ++out.cells;
  }
  return out;
}

namespace {

std::string fmt_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view field, const char* what) {
  double value = 0.0;
  const auto r = std::from_chars(field.data(), field.data() + field.size(), value);
  if (r.ec != std::errc{} || r.ptr != field.data() + field.size())
    throw std::invalid_argument(std::string("CSV: bad ") + what + " field '" +
                                std::string(field) + "'");
  return value;
}

long parse_long(std::string_view field, const char* what) {
  long value = 0;
  const auto r = std::from_chars(field.data(), field.data() + field.size(), value);
  if (r.ec != std::errc{} || r.ptr != field.data() + field.size())
    throw std::invalid_argument(std::string("CSV: bad ") + what + " field '" +
                                std::string(field) + "'");
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

constexpr std::string_view kRecordsHeader =
    "agent,instance,trial,budget,return,steps,tree_nodes,wall_ms";
constexpr std::string_view kAggregatesHeader = "agent,budget,mean_return,sem,mean_nodes,n";

}  // namespace

void write_records_csv(const std::vector<TrialRecord>& records, std::ostream& os) {
  os << kRecordsHeader << '\n';
  for (const auto& r : records) {
    const double ret =
        r.ok ? r.return_value : std::numeric_limits<double>::quiet_NaN();
    const double nodes =
        r.ok ? r.mean_tree_nodes : std::numeric_limits<double>::quiet_NaN();
    os << r.agent << ',' << r.instance << ',' << r.trial << ',' << r.budget << ','
       << fmt_double(ret) << ',' << r.steps << ',' << fmt_double(nodes) << ','
       << fmt_double(r.wall_ms) << '\n';
  }
}

std::vector<TrialRecord> parse_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kRecordsHeader)
    throw std::invalid_argument("records CSV: bad header");
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 8) throw std::invalid_argument("records CSV: bad field count");
    TrialRecord r;
    r.agent = std::string(f[0]);
    r.instance = static_cast<int>(parse_long(f[1], "instance"));
    r.trial = static_cast<int>(parse_long(f[2], "trial"));
    r.budget = static_cast<int>(parse_long(f[3], "budget"));
    r.return_value = parse_double(f[4], "return");
    r.steps = static_cast<int>(parse_long(f[5], "steps"));
    r.mean_tree_nodes = parse_double(f[6], "tree_nodes");
    r.wall_ms = parse_double(f[7], "wall_ms");
    r.ok = !std::isnan(r.return_value);
    out.push_back(std::move(r));
  }
  return out;
}

void write_aggregates_csv(const std::vector<AggregateRow>& rows, std::ostream& os) {
  os << kAggregatesHeader << '\n';
  for (const auto& r : rows)
    os << r.agent << ',' << r.budget << ',' << fmt_double(r.mean_return) << ','
       << fmt_double(r.sem) << ',' << fmt_double(r.mean_nodes) << ',' << r.n << '\n';
}

std::vector<AggregateRow> parse_aggregates_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kAggregatesHeader)
    throw std::invalid_argument("aggregates CSV: bad header");
  std::vector<AggregateRow> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) throw std::invalid_argument("aggregates CSV: bad field count");
    AggregateRow r;
    r.agent = std::string(f[0]);
    r.budget = static_cast<int>(parse_long(f[1], "budget"));
    r.mean_return = parse_double(f[2], "mean_return");
    r.sem = parse_double(f[3], "sem");
    r.mean_nodes = parse_double(f[4], "mean_nodes");
    r.n = parse_long(f[5], "n");
    out.push_back(std::move(r));
  }
  return out;
}

void write_search_log_header(std::ostream& os) {
  os << "agent,instance,trial,budget,step,recommended,tree_nodes,rollouts,root_arms\n";
}

void write_search_log_rows(const TrialRecord& cell,
                           const std::vector<SearchDiagnostics>& log, std::ostream& os) {
  for (std::size_t step = 0; step < log.size(); ++step) {
    const auto& d = log[step];
    os << cell.agent << ',' << cell.instance << ',' << cell.trial << ',' << cell.budget
       << ',' << step << ',' << d.recommended
       << (d.recommended_kind == ArmKind::Auxiliary ? "*" : "") << ',' << d.tree_nodes()
       << ',' << d.rollouts << ',';
    for (std::size_t i = 0; i < d.root_arms.size(); ++i) {
      const auto& arm = d.root_arms[i];
      if (i) os << '|';
      os << arm.action << (arm.kind == ArmKind::Auxiliary ? "*" : "") << ':' << arm.visits
         << ':' << fmt_double(arm.q);
    }
    os << '\n';
  }
}

void write_histogram_csv(const HistogramResult& hist, std::ostream& os) {
  os << "bin,lo,hi,count,frequency\n";
  const int bins = static_cast<int>(hist.counts.size());
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    const double freq =
        hist.cells > 0
            ? static_cast<double>(hist.counts[static_cast<std::size_t>(b)]) /
                  static_cast<double>(hist.cells)
            : 0.0;
    os << b << ',' << fmt_double(lo) << ',' << fmt_double(hi) << ','
       << hist.counts[static_cast<std::size_t>(b)] << ',' << fmt_double(freq) << '\n';
  }
}

// ---------------------------------------------------------------------------
// runners

namespace {

std::string resolved_cache_dir(const ExperimentSpec& spec) {
  if (!spec.cache_dir.empty()) return spec.cache_dir;
  if (const char* env = std::getenv("MCPLAN_CACHE_DIR")) return env;
  return {};
}

std::string cache_key(const std::string& content, double discount, double tol) {
  const std::uint64_t h =
      fnv1a64(content + "|g=" + fmt_double(discount) + "|t=" + fmt_double(tol));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct AgentRequirements {
  bool solve = false;    // V*/greedy of the full sailing MDP
  bool so_eval = false;  // Q^pi of StochasticOptimal.p, for the prior role
};

AgentRequirements sailing_requirements(const ExperimentSpec& spec,
                                       const std::vector<AgentSpec>& agents) {
  AgentRequirements need;
  const auto uses_so = [](const HeuristicChoice& c) {
    return c.kind == HeuristicChoice::Kind::StochasticOptimal;
  };
  for (const auto& a : agents) {
    if (a.base == AgentSpec::Base::Optimal) need.solve = true;
    if (a.base == AgentSpec::Base::Heuristic &&
        uses_so(a.heuristic_override.value_or(spec.policy_heuristic)))
      need.solve = true;
    if (a.base == AgentSpec::Base::Uct) {
      if (a.use_prior && uses_so(spec.prior_heuristic)) need.solve = need.so_eval = true;
      if (a.use_rollout && uses_so(spec.rollout_heuristic)) need.solve = true;
      if (a.use_aux && uses_so(spec.aux_heuristic)) need.solve = true;
    }
  }
  return need;
}

std::vector<std::uint32_t> sailing_valid_masks(const sailing::SailingSpace& space) {
  std::vector<std::uint32_t> masks(static_cast<std::size_t>(space.num_states()), 0);
  for (StateIndex i = 0; i < space.num_states(); ++i)
    masks[static_cast<std::size_t>(i)] =
        sailing::valid_action_mask(space.state(i), space.map());
  return masks;
}

struct SailingInstance {
  std::shared_ptr<const sailing::SailingMap> map;
  std::shared_ptr<const sailing::SailingModel> model;
  std::shared_ptr<const sailing::SailingSpace> space;
  std::shared_ptr<const SolveResult> solve;  // v + greedy
  std::shared_ptr<const SolveResult> so_eval;  // Q^pi table (v + q)
  std::vector<std::uint32_t> masks;
};

SailingInstance make_sailing_instance(const ExperimentSpec& spec,
                                      const AgentRequirements& need, int instance) {
  SailingInstance ctx;
  const auto& p = spec.sailing;
  if (!p.maps_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p.maps_dir))
      if (entry.path().extension() == ".map") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (static_cast<std::size_t>(instance) >= files.size())
      throw std::runtime_error("maps_dir has fewer .map files than instances");
    ctx.map = std::make_shared<sailing::SailingMap>(
        sailing::SailingMap::load(files[static_cast<std::size_t>(instance)].string()));
  } else {
    const sailing::Cell start =
        p.start ? sailing::Cell{(*p.start)[0], (*p.start)[1]} : sailing::Cell{2, 2};
    const sailing::Cell goal = p.goal ? sailing::Cell{(*p.goal)[0], (*p.goal)[1]}
                                      : sailing::Cell{p.width - 3, p.height - 3};
    Rng rng(instance_seed(spec.root_seed, instance));
    ctx.map = sailing::generate_map(p.width, p.height, p.block_probability, start, goal, rng)
                  .map;
  }
  ctx.model = std::make_shared<sailing::SailingModel>(ctx.map, spec.discount);
  if (!need.solve) return ctx;

  ctx.space = std::make_shared<sailing::SailingSpace>(ctx.map);
  ctx.masks = sailing_valid_masks(*ctx.space);
  const std::string cache = resolved_cache_dir(spec);
  const std::string key = cache_key(ctx.map->to_text(), spec.discount, spec.solve_tolerance);
  const std::string solve_path =
      cache.empty() ? "" : (fs::path(cache) / ("sail-" + key + ".solve")).string();
  if (!solve_path.empty()) {
    if (auto cached = load_solve(solve_path)) {
      ctx.solve = std::make_shared<SolveResult>(std::move(*cached));
    }
  }
  if (!ctx.solve) {
    const TabularMdp mdp = sailing::to_tabular(*ctx.space, spec.discount);
    SolveSettings settings;
    settings.tolerance = spec.solve_tolerance;
    auto solved = std::make_shared<SolveResult>(value_iteration(mdp, settings));
    solved->q.clear();  // greedy and v suffice for the agent policies
    if (!solve_path.empty()) {
      fs::create_directories(cache);
      save_solve(*solved, solve_path, /*include_q=*/false);
    }
    ctx.solve = std::move(solved);
  }

  if (need.so_eval) {
    const double p_mix = spec.prior_heuristic.p;
    const std::string eval_path =
        cache.empty()
            ? ""
            : (fs::path(cache) / ("sail-" + key + "-so" + fmt_double(p_mix) + ".pe"))
                  .string();
    if (!eval_path.empty()) {
      if (auto cached = load_solve(eval_path)) {
        ctx.so_eval = std::make_shared<SolveResult>(std::move(*cached));
      }
    }
    if (!ctx.so_eval) {
      const TabularMdp mdp = sailing::to_tabular(*ctx.space, spec.discount);
      const StochasticOptimalPolicy policy(ctx.solve->greedy, ctx.masks, p_mix);
      SolveSettings settings;
      settings.tolerance = spec.solve_tolerance;
      const PolicyEvalResult pe = policy_evaluation(
          mdp,
          [&](StateIndex s, ActionDistribution& out) { policy.action_distribution(s, out); },
          settings);
      auto as_solve = std::make_shared<SolveResult>();
      as_solve->num_states = mdp.num_states();
      as_solve->num_actions = mdp.num_actions();
      as_solve->discount = spec.discount;
      as_solve->v = pe.v;
      as_solve->q = pe.q;
      as_solve->greedy.assign(static_cast<std::size_t>(mdp.num_states()), -1);
      as_solve->iterations = pe.iterations;
      as_solve->residual = pe.residual;
      if (!eval_path.empty()) {
        fs::create_directories(cache);
        save_solve(*as_solve, eval_path, /*include_q=*/true);
      }
      ctx.so_eval = std::move(as_solve);
    }
  }
  return ctx;
}

template <typename State>
struct AgentRuntime {
  AgentSpec spec;
  std::unique_ptr<Policy<State>> policy;  // baseline agents
  std::unique_ptr<PriorValue<State>> prior;
  std::unique_ptr<Policy<State>> rollout;
  std::unique_ptr<Policy<State>> aux;
  SearchConfig<State> config;  // budget filled per cell
};

enum class HeuristicRole { BarePolicy, Rollout, Aux };

std::unique_ptr<Policy<sailing::SailingState>> make_sailing_policy(
    const HeuristicChoice& choice, const ExperimentSpec& spec, const SailingInstance& ctx,
    HeuristicRole role) {
  using sailing::SailingState;
  switch (choice.kind) {
    case HeuristicChoice::Kind::Stg:
      // Rollouts replace random sampling with argmax_a Q_STG; the auxiliary
      // arms and the bare agent play the direction-chasing policy itself.
      if (role == HeuristicRole::Rollout)
        return std::make_unique<sailing::StgGreedyPolicy>(ctx.map, spec.discount);
      return std::make_unique<sailing::SailTowardsGoalPolicy>(ctx.map);
    case HeuristicChoice::Kind::Uniform:
      return std::make_unique<UniformRandomPolicy<SailingState>>(*ctx.model);
    case HeuristicChoice::Kind::StochasticOptimal: {
      auto inner = std::make_shared<StochasticOptimalPolicy>(
          stochastic_optimal(*ctx.solve, choice.p, ctx.masks));
      return std::make_unique<IndexedPolicy<SailingState>>(std::move(inner),
                                                           ctx.space->indexer());
    }
    case HeuristicChoice::Kind::Ga:
      break;
  }
  throw std::invalid_argument("sailing: unsupported heuristic " + choice.to_string());
}

std::unique_ptr<PriorValue<sailing::SailingState>> make_sailing_prior(
    const HeuristicChoice& choice, const ExperimentSpec& spec, const SailingInstance& ctx) {
  using sailing::SailingState;
  switch (choice.kind) {
    case HeuristicChoice::Kind::Stg:
      return std::make_unique<sailing::StgPrior>(ctx.map, spec.discount);
    case HeuristicChoice::Kind::Uniform:
      return std::make_unique<ZeroPrior<SailingState>>();
    case HeuristicChoice::Kind::StochasticOptimal:
      return std::make_unique<TableQPrior<SailingState>>(
          ctx.so_eval->q, ctx.so_eval->num_actions, ctx.space->indexer(), 1);
    case HeuristicChoice::Kind::Ga:
      break;
  }
  throw std::invalid_argument("sailing: unsupported prior " + choice.to_string());
}

AgentRuntime<sailing::SailingState> make_sailing_agent(const AgentSpec& agent,
                                                       const ExperimentSpec& spec,
                                                       const SailingInstance& ctx) {
  using sailing::SailingState;
  AgentRuntime<SailingState> rt;
  rt.spec = agent;
  switch (agent.base) {
    case AgentSpec::Base::Random:
      rt.policy = std::make_unique<UniformRandomPolicy<SailingState>>(*ctx.model);
      return rt;
    case AgentSpec::Base::Optimal: {
      auto inner = std::make_shared<GreedyTablePolicy>(extract_greedy(*ctx.solve));
      rt.policy = std::make_unique<IndexedPolicy<SailingState>>(std::move(inner),
                                                                ctx.space->indexer());
      return rt;
    }
    case AgentSpec::Base::Heuristic:
      rt.policy = make_sailing_policy(agent.heuristic_override.value_or(spec.policy_heuristic),
                                      spec, ctx, HeuristicRole::BarePolicy);
      return rt;
    case AgentSpec::Base::Uct:
      break;
  }
  rt.config.exploration_constant = spec.effective_exploration_constant();
  rt.config.horizon = spec.horizon;
  rt.config.recommendation = spec.recommendation;
  if (agent.use_prior) {
    rt.prior = make_sailing_prior(spec.prior_heuristic, spec, ctx);
    rt.config.prior = rt.prior.get();
  }
  if (agent.use_rollout) {
    rt.rollout = make_sailing_policy(spec.rollout_heuristic, spec, ctx, HeuristicRole::Rollout);
    rt.config.rollout_policy = rt.rollout.get();
  }
  if (agent.use_aux) {
    rt.aux = make_sailing_policy(spec.aux_heuristic, spec, ctx, HeuristicRole::Aux);
    rt.config.aux_policy = rt.aux.get();
  }
  return rt;
}

struct SheepContext {
  std::shared_ptr<const sheep::Maze> maze;
  std::shared_ptr<const sheep::SheepModel> model;
  std::shared_ptr<const sheep::SubtaskSet> subtasks;
  sheep::SheepParams params;
  int min_ghost_sheep_distance = 3;
};

SheepContext make_sheep_context(const ExperimentSpec& spec,
                                const std::vector<AgentSpec>& agents) {
  SheepContext ctx;
  ctx.params.flee_radius = spec.sheep.flee_radius;
  ctx.params.shoot_range = spec.sheep.shoot_range;
  ctx.min_ghost_sheep_distance = spec.sheep.min_ghost_sheep_distance;
  ctx.maze = std::make_shared<sheep::Maze>(
      spec.sheep.maze_file.empty() ? sheep::Maze::from_text(sheep::reference_maze_text())
                                   : sheep::Maze::load(spec.sheep.maze_file));
  ctx.model = std::make_shared<sheep::SheepModel>(ctx.maze, spec.discount, ctx.params);

  bool need_ga = false;
  const auto uses_ga = [](const HeuristicChoice& c) {
    return c.kind == HeuristicChoice::Kind::Ga;
  };
  for (const auto& a : agents) {
    if (a.base == AgentSpec::Base::Heuristic &&
        uses_ga(a.heuristic_override.value_or(spec.policy_heuristic)))
      need_ga = true;
    if (a.base == AgentSpec::Base::Uct &&
        ((a.use_prior && uses_ga(spec.prior_heuristic)) ||
         (a.use_rollout && uses_ga(spec.rollout_heuristic)) ||
         (a.use_aux && uses_ga(spec.aux_heuristic))))
      need_ga = true;
  }
  if (!need_ga) return ctx;

  const std::string cache = resolved_cache_dir(spec);
  std::string param_tag = std::to_string(ctx.params.flee_radius) + "-" +
                          std::to_string(ctx.params.shoot_range);
  const std::string key =
      cache_key(ctx.maze->to_text() + param_tag, spec.discount, spec.solve_tolerance);
  SolveSettings settings;
  settings.tolerance = spec.solve_tolerance;
  auto load_or_solve = [&](sheep::SubtaskKind kind,
                           const std::string& tag) -> std::shared_ptr<const SolveResult> {
    const std::string path =
        cache.empty() ? "" : (fs::path(cache) / ("sheep-" + key + "-" + tag + ".solve")).string();
    if (!path.empty()) {
      if (auto cached = load_solve(path))
        return std::make_shared<SolveResult>(std::move(*cached));
    }
    const TabularMdp mdp = sheep::build_subtask_mdp(*ctx.maze, kind, spec.discount, ctx.params);
    auto solved = std::make_shared<SolveResult>(value_iteration(mdp, settings));
    if (!path.empty()) {
      fs::create_directories(cache);
      save_solve(*solved, path, /*include_q=*/true);
    }
    return solved;
  };

  auto set = std::make_shared<sheep::SubtaskSet>();
  set->maze = ctx.maze;
  set->params = ctx.params;
  auto sheep_solved = load_or_solve(sheep::SubtaskKind::Sheep, "sheep");
  auto ghost_solved = load_or_solve(sheep::SubtaskKind::Ghost, "ghost");
  set->models[0] = {1, sheep::SubtaskKind::Sheep,
                    static_cast<StateIndex>(sheep_solved->num_states), sheep_solved};
  set->models[1] = {2, sheep::SubtaskKind::Ghost,
                    static_cast<StateIndex>(ghost_solved->num_states), ghost_solved};
  set->models[2] = {3, sheep::SubtaskKind::Ghost,
                    static_cast<StateIndex>(ghost_solved->num_states), ghost_solved};
  ctx.subtasks = std::move(set);
  return ctx;
}

std::unique_ptr<Policy<sheep::SheepState>> make_sheep_policy(const HeuristicChoice& choice,
                                                             const SheepContext& ctx) {
  using sheep::SheepState;
  switch (choice.kind) {
    case HeuristicChoice::Kind::Ga:
      return std::make_unique<sheep::GoalAveragingPolicy>(ctx.subtasks);
    case HeuristicChoice::Kind::Uniform:
      return std::make_unique<UniformRandomPolicy<SheepState>>(*ctx.model);
    default:
      break;
  }
  throw std::invalid_argument("sheep: unsupported heuristic " + choice.to_string());
}

AgentRuntime<sheep::SheepState> make_sheep_agent(const AgentSpec& agent,
                                                 const ExperimentSpec& spec,
                                                 const SheepContext& ctx) {
  using sheep::SheepState;
  AgentRuntime<SheepState> rt;
  rt.spec = agent;
  switch (agent.base) {
    case AgentSpec::Base::Random:
      rt.policy = std::make_unique<UniformRandomPolicy<SheepState>>(*ctx.model);
      return rt;
    case AgentSpec::Base::Optimal:
      throw std::invalid_argument("sheep: no Optimal agent");
    case AgentSpec::Base::Heuristic:
      rt.policy =
          make_sheep_policy(agent.heuristic_override.value_or(spec.policy_heuristic), ctx);
      return rt;
    case AgentSpec::Base::Uct:
      break;
  }
  rt.config.exploration_constant = spec.effective_exploration_constant();
  rt.config.horizon = spec.horizon;
  rt.config.recommendation = spec.recommendation;
  if (agent.use_prior) {
    if (spec.prior_heuristic.kind == HeuristicChoice::Kind::Ga)
      rt.prior = std::make_unique<sheep::GaPrior>(ctx.subtasks);
    else
      rt.prior = std::make_unique<ZeroPrior<SheepState>>();
    rt.config.prior = rt.prior.get();
  }
  if (agent.use_rollout) {
    rt.rollout = make_sheep_policy(spec.rollout_heuristic, ctx);
    rt.config.rollout_policy = rt.rollout.get();
  }
  if (agent.use_aux) {
    rt.aux = make_sheep_policy(spec.aux_heuristic, ctx);
    rt.config.aux_policy = rt.aux.get();
  }
  return rt;
}

template <typename State>
TrialRecord run_cell(const GenerativeModel<State>& model, AgentRuntime<State>& rt,
                     const State& start, const ExperimentSpec& spec, int instance, int trial,
                     int budget, const RunCallbacks& callbacks) {
  TrialRecord rec;
  rec.agent = rt.spec.name;
  rec.instance = instance;
  rec.trial = trial;
  rec.budget = budget;
  rec.start_digest = static_cast<std::uint64_t>(start.packed());
  Rng rng(cell_seed(spec.root_seed, instance, trial, rt.spec.name, budget));
  try {
    if (rt.policy) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = run_policy(model, *rt.policy, start, spec.max_steps, rng);
      rec.return_value = result.return_value;
      rec.steps = result.steps;
      rec.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
    } else {
      SearchConfig<State> config = rt.config;
      config.budget = budget;
      std::vector<SearchDiagnostics> log;
      const bool want_log = static_cast<bool>(callbacks.on_search_log);
      const EpisodeResult ep =
          plan_episode(model, start, config, spec.max_steps, rng, want_log ? &log : nullptr);
      rec.return_value = ep.return_value;
      rec.steps = ep.steps;
      rec.mean_tree_nodes = ep.mean_tree_nodes;
      rec.wall_ms = ep.wall_ms;
      if (want_log) callbacks.on_search_log(rec, log);
    }
  } catch (const std::exception& err) {
    rec.ok = false;
    rec.error = err.what();
    rec.return_value = std::numeric_limits<double>::quiet_NaN();
    rec.steps = 0;
    rec.mean_tree_nodes = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

}  // namespace

std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec,
                                        const RunCallbacks& callbacks) {
  spec.validate();
  std::vector<AgentSpec> agents;
  for (const auto& token : spec.agents) agents.push_back(AgentSpec::parse(token));
  const std::size_t n_cells = agents.size() * static_cast<std::size_t>(spec.instances) *
                              static_cast<std::size_t>(spec.trials_per_instance) *
                              spec.budgets.size();
  std::vector<TrialRecord> records(n_cells);
  const auto slot = [&](std::size_t ai, int inst, int trial, std::size_t bi) {
    return ((ai * static_cast<std::size_t>(spec.instances) + static_cast<std::size_t>(inst)) *
                static_cast<std::size_t>(spec.trials_per_instance) +
            static_cast<std::size_t>(trial)) *
               spec.budgets.size() +
           bi;
  };

  if (spec.domain == ExperimentDomain::Sailing) {
    const AgentRequirements need = sailing_requirements(spec, agents);
    for (int inst = 0; inst < spec.instances; ++inst) {
      const SailingInstance ctx = make_sailing_instance(spec, need, inst);
      for (std::size_t ai = 0; ai < agents.size(); ++ai) {
        auto rt = make_sailing_agent(agents[ai], spec, ctx);
        for (int trial = 0; trial < spec.trials_per_instance; ++trial) {
          Rng start_rng(start_seed(spec.root_seed, inst, trial));
          const auto start = sailing::sample_start_state(*ctx.map, start_rng);
          for (std::size_t bi = 0; bi < spec.budgets.size(); ++bi) {
            auto rec = run_cell(*ctx.model, rt, start, spec, inst, trial,
                                spec.budgets[bi], callbacks);
            if (callbacks.on_record) callbacks.on_record(rec);
            records[slot(ai, inst, trial, bi)] = std::move(rec);
          }
        }
      }
    }
  } else {
    const SheepContext ctx = make_sheep_context(spec, agents);
    std::vector<AgentRuntime<sheep::SheepState>> runtimes;
    for (const auto& agent : agents) runtimes.push_back(make_sheep_agent(agent, spec, ctx));
    for (int inst = 0; inst < spec.instances; ++inst) {
      for (int trial = 0; trial < spec.trials_per_instance; ++trial) {
        Rng start_rng(start_seed(spec.root_seed, inst, trial));
        const auto start =
            sheep::sample_start_state(*ctx.maze, start_rng, ctx.min_ghost_sheep_distance);
        for (std::size_t ai = 0; ai < agents.size(); ++ai) {
          for (std::size_t bi = 0; bi < spec.budgets.size(); ++bi) {
            auto rec = run_cell(*ctx.model, runtimes[ai], start, spec, inst, trial,
                                spec.budgets[bi], callbacks);
            if (callbacks.on_record) callbacks.on_record(rec);
            records[slot(ai, inst, trial, bi)] = std::move(rec);
          }
        }
      }
    }
  }
  return records;
}

}  // namespace mcplan
