// mcplan command line tool: map generation, exact solves, experiment runs,
// aggregation and histogram extraction. See README.md for the workflows.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcplan/experiment.hpp"
#include "mcplan/rng.hpp"
#include "mcplan/sailing.hpp"
#include "mcplan/sheep.hpp"
#include "mcplan/tabular.hpp"
#include "mcplan/value_iteration.hpp"

namespace fs = std::filesystem;
using namespace mcplan;

namespace {

std::vector<TrialRecord> read_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return parse_records_csv(is);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path);
}

int cmd_gen_maps(int width, int height, double p, int count, std::uint64_t seed,
                 const std::string& out_dir, std::vector<int> start_v,
                 std::vector<int> goal_v) {
  fs::create_directories(out_dir);
  const sailing::Cell start = start_v.size() == 2 ? sailing::Cell{start_v[0], start_v[1]}
                                                  : sailing::Cell{2, 2};
  const sailing::Cell goal = goal_v.size() == 2 ? sailing::Cell{goal_v[0], goal_v[1]}
                                                : sailing::Cell{width - 3, height - 3};
  int total_rejections = 0;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {fnv1a64("map"), static_cast<std::uint64_t>(i)}));
    auto result = sailing::generate_map(width, height, p, start, goal, rng);
    total_rejections += result.rejections;
    char name[64];
    std::snprintf(name, sizeof(name), "instance-%04d.map", i);
    result.map->save((fs::path(out_dir) / name).string());
  }
  std::cout << "wrote " << count << " maps to " << out_dir << " (" << total_rejections
            << " rejected samples)\n";
  return 0;
}

int cmd_solve(const std::string& map_path, double gamma, double tol,
              const std::string& csv_path, std::string cache_dir) {
  auto map = std::make_shared<sailing::SailingMap>(sailing::SailingMap::load(map_path));
  const sailing::SailingSpace space(map);
  const TabularMdp mdp = sailing::to_tabular(space, gamma);
  SolveSettings settings;
  settings.tolerance = tol;
  const SolveResult solved = value_iteration(mdp, settings);

  if (cache_dir.empty()) {
    if (const char* env = std::getenv("MCPLAN_CACHE_DIR")) cache_dir = env;
  }
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    char tolbuf[32], gbuf[32];
    auto tr = std::to_chars(tolbuf, tolbuf + sizeof(tolbuf), tol);
    auto gr = std::to_chars(gbuf, gbuf + sizeof(gbuf), gamma);
    const std::uint64_t h = fnv1a64(map->to_text() + "|g=" + std::string(gbuf, gr.ptr) +
                                    "|t=" + std::string(tolbuf, tr.ptr));
    char key[17];
    std::snprintf(key, sizeof(key), "%016llx", static_cast<unsigned long long>(h));
    const std::string path = (fs::path(cache_dir) / ("sail-" + std::string(key) + ".solve"))
                                 .string();
    save_solve(solved, path, /*include_q=*/false);
    std::cout << "cache: " << path << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream os(csv_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + csv_path);
    write_solve_csv(solved, os);
  }
  const sailing::SailingState start{
      static_cast<std::int8_t>(map->start().x), static_cast<std::int8_t>(map->start().y),
      0, 0, 0};
  std::cout << "states: " << solved.num_states << "\niterations: " << solved.iterations
            << "\nresidual: " << solved.residual
            << "\nV*(start, b=N, w=N/N): " << solved.v[static_cast<std::size_t>(
                   space.index(start))]
            << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& agg_path, const std::string& search_log_path, bool quiet,
            const ExperimentSpec& overrides, const std::vector<std::string>& override_flags) {
  ExperimentSpec spec = ExperimentSpec::from_json_file(config_path);
  // Flag overrides: only the fields the user actually passed.
  for (const auto& flag : override_flags) {
    if (flag == "instances") spec.instances = overrides.instances;
    else if (flag == "trials") spec.trials_per_instance = overrides.trials_per_instance;
    else if (flag == "seed") spec.root_seed = overrides.root_seed;
    else if (flag == "budgets") spec.budgets = overrides.budgets;
    else if (flag == "agents") spec.agents = overrides.agents;
    else if (flag == "cache-dir") spec.cache_dir = overrides.cache_dir;
    else if (flag == "max-steps") spec.max_steps = overrides.max_steps;
  }
  spec.validate();

  int done = 0;
  const int total = static_cast<int>(spec.agents.size()) * spec.instances *
                    spec.trials_per_instance * static_cast<int>(spec.budgets.size());
  RunCallbacks callbacks;
  if (!quiet) {
    callbacks.on_record = [&](const TrialRecord& r) {
      ++done;
      std::cerr << "[" << done << "/" << total << "] " << r.agent << " inst " << r.instance
                << " trial " << r.trial << " budget " << r.budget << " -> "
                << (r.ok ? std::to_string(r.return_value) : "ERROR: " + r.error) << "\n";
    };
  }
  std::ofstream search_log;
  if (!search_log_path.empty()) {
    search_log.open(search_log_path, std::ios::trunc);
    if (!search_log) throw std::runtime_error("cannot open " + search_log_path);
    write_search_log_header(search_log);
    callbacks.on_search_log = [&](const TrialRecord& cell,
                                  const std::vector<SearchDiagnostics>& log) {
      write_search_log_rows(cell, log, search_log);
    };
  }
  const auto records = run_experiment(spec, callbacks);

  std::ostringstream records_csv;
  write_records_csv(records, records_csv);
  if (out_path.empty()) std::cout << records_csv.str();
  else write_text(out_path, records_csv.str());

  if (!agg_path.empty()) {
    std::ostringstream agg_csv;
    write_aggregates_csv(aggregate(records), agg_csv);
    write_text(agg_path, agg_csv.str());
  }
  const auto errors = static_cast<int>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
  if (errors > 0) std::cerr << errors << " error rows\n";
  return std::min(errors, 255);
}

int cmd_aggregate(const std::string& in_path, const std::string& out_path) {
  const auto rows = aggregate(read_records(in_path));
  std::ostringstream os;
  write_aggregates_csv(rows, os);
  if (out_path.empty()) std::cout << os.str();
  else write_text(out_path, os.str());
  return 0;
}

int cmd_histogram(const std::string& in_path, const std::string& heuristic_agent,
                  const std::string& random_agent, const std::string& optimal_agent, int bins,
                  const std::string& out_path) {
  const auto records = read_records(in_path);
  std::vector<TrialRecord> h, r, o;
  for (const auto& rec : records) {
    if (rec.agent == heuristic_agent) h.push_back(rec);
    else if (rec.agent == random_agent) r.push_back(rec);
    else if (rec.agent == optimal_agent) o.push_back(rec);
  }
  const HistogramResult hist = histogram_heuristic(h, r, o, bins);
  std::ostringstream os;
  write_histogram_csv(hist, os);
  if (out_path.empty()) std::cout << os.str();
  else write_text(out_path, os.str());
  std::cerr << "cells: " << hist.cells << ", degenerate skipped: " << hist.skipped_degenerate
            << ", unmatched skipped: " << hist.skipped_unmatched << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo planning benchmarks: UCT and heuristic-bootstrapped variants"};
  app.require_subcommand(1);

  // gen-maps
  auto* gen = app.add_subcommand("gen-maps", "Generate random sailing map instances");
  int width = 20, height = 20, count = 10;
  double block_p = 0.4;
  std::uint64_t seed = 1;
  std::string out_dir = "maps";
  std::vector<int> start_v, goal_v;
  gen->add_option("--width", width);
  gen->add_option("--height", height);
  gen->add_option("-p,--block-probability", block_p);
  gen->add_option("--count", count);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_dir);
  gen->add_option("--start", start_v)->expected(2);
  gen->add_option("--goal", goal_v)->expected(2);

  // solve
  auto* solve = app.add_subcommand("solve", "Value-iterate a sailing map to V*/greedy");
  std::string map_path, solve_csv, cache_dir;
  double gamma = 0.99, tol = 1e-6;
  solve->add_option("--map", map_path)->required();
  solve->add_option("--gamma", gamma);
  solve->add_option("--tol", tol);
  solve->add_option("--csv", solve_csv);
  solve->add_option("--cache-dir", cache_dir);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON spec");
  std::string config_path, out_path, agg_path, search_log_path;
  bool quiet = false;
  ExperimentSpec overrides;
  std::vector<std::string> override_flags;
  std::vector<std::string> agents_flag;
  std::vector<int> budgets_flag;
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_path);
  run->add_option("--aggregate-out", agg_path);
  run->add_option("--search-log", search_log_path);
  run->add_flag("--quiet", quiet);
  run->add_option("--instances", overrides.instances)
      ->each([&](const std::string&) { override_flags.push_back("instances"); });
  run->add_option("--trials", overrides.trials_per_instance)
      ->each([&](const std::string&) { override_flags.push_back("trials"); });
  run->add_option("--seed", overrides.root_seed)
      ->each([&](const std::string&) { override_flags.push_back("seed"); });
  run->add_option("--budgets", budgets_flag)
      ->delimiter(',')
      ->each([&](const std::string&) { override_flags.push_back("budgets"); });
  run->add_option("--agents", agents_flag)
      ->delimiter(',')
      ->each([&](const std::string&) { override_flags.push_back("agents"); });
  run->add_option("--cache-dir", overrides.cache_dir)
      ->each([&](const std::string&) { override_flags.push_back("cache-dir"); });
  run->add_option("--max-steps", overrides.max_steps)
      ->each([&](const std::string&) { override_flags.push_back("max-steps"); });

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Aggregate a records CSV");
  std::string agg_in, agg_out;
  agg->add_option("--in", agg_in)->required();
  agg->add_option("--out", agg_out);

  // histogram
  auto* hist = app.add_subcommand("histogram", "Heuristic-quality histogram from records");
  std::string hist_in, hist_out, h_agent, r_agent = "Random", o_agent = "Optimal";
  int bins = 10;
  hist->add_option("--in", hist_in)->required();
  hist->add_option("--heuristic-agent", h_agent)->required();
  hist->add_option("--random-agent", r_agent);
  hist->add_option("--optimal-agent", o_agent);
  hist->add_option("--bins", bins);
  hist->add_option("--out", hist_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_maps(width, height, block_p, count, seed, out_dir, start_v, goal_v);
    if (solve->parsed()) return cmd_solve(map_path, gamma, tol, solve_csv, cache_dir);
    if (run->parsed()) {
      overrides.budgets = budgets_flag;
      overrides.agents = agents_flag;
      return cmd_run(config_path, out_path, agg_path, search_log_path, quiet, overrides,
                     override_flags);
    }
    if (agg->parsed()) return cmd_aggregate(agg_in, agg_out);
    if (hist->parsed())
      return cmd_histogram(hist_in, h_agent, r_agent, o_agent, bins, hist_out);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
