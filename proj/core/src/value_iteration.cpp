#include "mcplan/value_iteration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mcplan {

namespace {

int default_max_iterations(const TabularMdp& mdp, double tol) {
  const double gamma = mdp.discount();
  if (gamma <= 0.0) return 2;
  const auto [lo, hi] = mdp.reward_bounds();
  const double r_max = std::max(std::abs(lo), std::abs(hi));
  if (r_max == 0.0) return 2;
  const double bound = 10.0 * std::log(tol * (1.0 - gamma) / r_max) / std::log(gamma);
  if (!(bound > 0.0)) return 2;
  return static_cast<int>(std::ceil(bound)) + 1;
}

/// One expected-reward value per (s, a) row; rewards then drop out of the
/// sweep loop entirely.
std::vector<double> expected_rewards(const TabularMdp& mdp) {
  const std::size_t rows =
      static_cast<std::size_t>(mdp.num_states()) * static_cast<std::size_t>(mdp.num_actions());
  std::vector<double> rbar(rows, 0.0);
  const auto prob = mdp.prob();
  const auto reward = mdp.reward();
  for (StateIndex s = 0; s < mdp.num_states(); ++s) {
    for (Action a = 0; a < mdp.num_actions(); ++a) {
      double acc = 0.0;
      for (auto i = mdp.row_begin(s, a); i < mdp.row_end(s, a); ++i)
        acc += prob[static_cast<std::size_t>(i)] * reward[static_cast<std::size_t>(i)];
      rbar[mdp.row(s, a)] = acc;
    }
  }
  return rbar;
}

}  // namespace

SolveResult value_iteration(const TabularMdp& mdp, const SolveSettings& settings) {
  if (!(settings.tolerance > 0.0))
    throw std::invalid_argument("value_iteration: tolerance must be > 0");
  const int max_iter = settings.max_iterations > 0
                           ? settings.max_iterations
                           : default_max_iterations(mdp, settings.tolerance);
  const StateIndex n = mdp.num_states();
  const Action k = mdp.num_actions();
  const double gamma = mdp.discount();
  const auto rbar = expected_rewards(mdp);
  const auto next = mdp.next();
  const auto prob = mdp.prob();

  SolveResult out;
  out.num_states = n;
  out.num_actions = k;
  out.discount = gamma;
  out.v.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<double> v_next(static_cast<std::size_t>(n), 0.0);
  double residual = 0.0;
  int iter = 0;
  for (iter = 1; iter <= max_iter; ++iter) {
    residual = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      double best = 0.0;
      if (!mdp.terminal(s)) {
        best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (Action a = 0; a < k; ++a) {
          const auto b = mdp.row_begin(s, a), e = mdp.row_end(s, a);
          if (b == e) continue;
          any = true;
          double ev = 0.0;
          for (auto i = b; i < e; ++i)
            ev += prob[static_cast<std::size_t>(i)] *
                  out.v[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])];
          const double q = rbar[mdp.row(s, a)] + gamma * ev;
          if (q > best) best = q;
        }
        if (!any) best = 0.0;  // non-terminal state with no edges: absorbing
      }
      v_next[static_cast<std::size_t>(s)] = best;
      const double d = std::abs(best - out.v[static_cast<std::size_t>(s)]);
      if (d > residual) residual = d;
    }
    out.v.swap(v_next);
    if (settings.record_residuals) out.residual_history.push_back(residual);
    if (residual <= settings.tolerance) break;
  }
  if (residual > settings.tolerance)
    throw std::runtime_error("value_iteration: no convergence after " +
                             std::to_string(max_iter) + " iterations (residual " +
                             std::to_string(residual) + ")");
  out.iterations = std::min(iter, max_iter);
  out.residual = residual;

  // Final Q* fill from the converged V*.
  out.q.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(k),
               std::numeric_limits<double>::quiet_NaN());
  out.greedy.assign(static_cast<std::size_t>(n), -1);
  const auto reward = mdp.reward();
  for (StateIndex s = 0; s < n; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    Action best_a = -1;
    for (Action a = 0; a < k; ++a) {
      const auto b = mdp.row_begin(s, a), e = mdp.row_end(s, a);
      if (b == e) continue;
      double q = 0.0;
      for (auto i = b; i < e; ++i) {
        const auto j = static_cast<std::size_t>(i);
        q += prob[j] * (reward[j] + gamma * out.v[static_cast<std::size_t>(next[j])]);
      }
      out.q[mdp.row(s, a)] = q;
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.greedy[static_cast<std::size_t>(s)] = best_a;
  }
  return out;
}

PolicyEvalResult policy_evaluation(
    const TabularMdp& mdp,
    const std::function<void(StateIndex, ActionDistribution&)>& policy,
    const SolveSettings& settings) {
  if (!(settings.tolerance > 0.0))
    throw std::invalid_argument("policy_evaluation: tolerance must be > 0");
  const int max_iter = settings.max_iterations > 0
                           ? settings.max_iterations
                           : default_max_iterations(mdp, settings.tolerance);
  const StateIndex n = mdp.num_states();
  const Action k = mdp.num_actions();
  const double gamma = mdp.discount();
  const auto rbar = expected_rewards(mdp);
  const auto next = mdp.next();
  const auto prob = mdp.prob();

  // Materialize the distributions once.
  std::vector<double> pi(static_cast<std::size_t>(n) * static_cast<std::size_t>(k), 0.0);
  ActionDistribution dist;
  for (StateIndex s = 0; s < n; ++s) {
    if (mdp.terminal(s)) continue;
    dist.clear();
    policy(s, dist);
    for (const auto& ap : dist) {
      if (!mdp.action_valid(s, ap.action))
        throw std::invalid_argument("policy_evaluation: policy uses invalid action");
      pi[mdp.row(s, ap.action)] = ap.prob;
    }
  }

  PolicyEvalResult out;
  out.v.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> v_next(static_cast<std::size_t>(n), 0.0);
  double residual = 0.0;
  int iter = 0;
  for (iter = 1; iter <= max_iter; ++iter) {
    residual = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      double acc = 0.0;
      if (!mdp.terminal(s)) {
        for (Action a = 0; a < k; ++a) {
          const double w = pi[mdp.row(s, a)];
          if (w == 0.0) continue;
          double ev = 0.0;
          for (auto i = mdp.row_begin(s, a); i < mdp.row_end(s, a); ++i)
            ev += prob[static_cast<std::size_t>(i)] *
                  out.v[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])];
          acc += w * (rbar[mdp.row(s, a)] + gamma * ev);
        }
      }
      v_next[static_cast<std::size_t>(s)] = acc;
      const double d = std::abs(acc - out.v[static_cast<std::size_t>(s)]);
      if (d > residual) residual = d;
    }
    out.v.swap(v_next);
    if (residual <= settings.tolerance) break;
  }
  if (residual > settings.tolerance)
    throw std::runtime_error("policy_evaluation: no convergence");
  out.iterations = std::min(iter, max_iter);
  out.residual = residual;

  out.q.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(k),
               std::numeric_limits<double>::quiet_NaN());
  const auto reward = mdp.reward();
  for (StateIndex s = 0; s < n; ++s) {
    for (Action a = 0; a < k; ++a) {
      const auto b = mdp.row_begin(s, a), e = mdp.row_end(s, a);
      if (b == e) continue;
      double q = 0.0;
      for (auto i = b; i < e; ++i) {
        const auto j = static_cast<std::size_t>(i);
        q += prob[j] * (reward[j] + gamma * out.v[static_cast<std::size_t>(next[j])]);
      }
      out.q[mdp.row(s, a)] = q;
    }
  }
  return out;
}

GreedyTablePolicy extract_greedy(const SolveResult& result) {
  return GreedyTablePolicy(result.greedy);
}

StochasticOptimalPolicy::StochasticOptimalPolicy(std::vector<Action> greedy,
                                                 std::vector<std::uint32_t> valid_masks,
                                                 double p)
    : greedy_(std::move(greedy)), valid_masks_(std::move(valid_masks)), p_(p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("StochasticOptimalPolicy: p must be in [0,1]");
  if (greedy_.size() != valid_masks_.size())
    throw std::invalid_argument("StochasticOptimalPolicy: table size mismatch");
}

void StochasticOptimalPolicy::action_distribution(const StateIndex& s,
                                                  ActionDistribution& out) const {
  out.clear();
  const std::uint32_t mask = valid_masks_.at(static_cast<std::size_t>(s));
  const Action greedy = greedy_[static_cast<std::size_t>(s)];
  const int count = std::popcount(mask);
  if (count == 0) throw std::invalid_argument("StochasticOptimalPolicy: no valid actions");
  if (p_ == 1.0) {
    out.push_back({greedy, 1.0});
    return;
  }
  const double share = (1.0 - p_) / static_cast<double>(count);
  for (Action a = 0; a < 32; ++a) {
    if (!(mask & (1u << a))) continue;
    out.push_back({a, share + (a == greedy ? p_ : 0.0)});
  }
}

Action StochasticOptimalPolicy::sample(const StateIndex& s, Rng& rng) const {
  const Action greedy = greedy_.at(static_cast<std::size_t>(s));
  if (p_ > 0.0 && rng.uniform01() < p_) return greedy;
  const std::uint32_t mask = valid_masks_[static_cast<std::size_t>(s)];
  const int count = std::popcount(mask);
  int pick = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(count)));
  for (Action a = 0; a < 32; ++a) {
    if (!(mask & (1u << a))) continue;
    if (pick-- == 0) return a;
  }
  return greedy;
}

StochasticOptimalPolicy stochastic_optimal(const SolveResult& result, double p,
                                           std::vector<std::uint32_t> valid_masks) {
  return StochasticOptimalPolicy(result.greedy, std::move(valid_masks), p);
}

StochasticOptimalPolicy stochastic_optimal(const SolveResult& result, double p,
                                           const TabularMdp& mdp) {
  return stochastic_optimal(result, p, mdp.valid_action_masks());
}

namespace {
constexpr char kMagic[8] = {'M', 'C', 'P', 'L', 'N', 'V', 'I', '1'};

template <typename T>
void write_pod(std::ofstream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <typename T>
bool read_pod(std::ifstream& is, T& value) {
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return static_cast<bool>(is);
}
}  // namespace

void save_solve(const SolveResult& result, const std::string& path, bool include_q) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_solve: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, static_cast<std::int64_t>(result.num_states));
  write_pod(os, static_cast<std::int64_t>(result.num_actions));
  write_pod(os, result.discount);
  write_pod(os, static_cast<std::int32_t>(result.iterations));
  write_pod(os, result.residual);
  const std::uint32_t flags = include_q ? 1u : 0u;
  write_pod(os, flags);
  os.write(reinterpret_cast<const char*>(result.v.data()),
           static_cast<std::streamsize>(result.v.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(result.greedy.data()),
           static_cast<std::streamsize>(result.greedy.size() * sizeof(Action)));
  if (include_q)
    os.write(reinterpret_cast<const char*>(result.q.data()),
             static_cast<std::streamsize>(result.q.size() * sizeof(double)));
  if (!os) throw std::runtime_error("save_solve: write failed for " + path);
}

std::optional<SolveResult> load_solve(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
  std::int64_t n = 0, k = 0;
  std::int32_t iters = 0;
  std::uint32_t flags = 0;
  SolveResult out;
  if (!read_pod(is, n) || !read_pod(is, k) || !read_pod(is, out.discount) ||
      !read_pod(is, iters) || !read_pod(is, out.residual) || !read_pod(is, flags))
    return std::nullopt;
  if (n < 0 || k <= 0) return std::nullopt;
  out.num_states = static_cast<StateIndex>(n);
  out.num_actions = static_cast<Action>(k);
  out.iterations = iters;
  out.v.resize(static_cast<std::size_t>(n));
  out.greedy.resize(static_cast<std::size_t>(n));
  is.read(reinterpret_cast<char*>(out.v.data()),
          static_cast<std::streamsize>(out.v.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(out.greedy.data()),
          static_cast<std::streamsize>(out.greedy.size() * sizeof(Action)));
  if (flags & 1u) {
    out.q.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    is.read(reinterpret_cast<char*>(out.q.data()),
            static_cast<std::streamsize>(out.q.size() * sizeof(double)));
  }
  if (!is) return std::nullopt;
  return out;
}

void write_solve_csv(const SolveResult& result, std::ostream& os) {
  os << "state,v_star,greedy_action\n";
  char buf[64];
  for (StateIndex s = 0; s < result.num_states; ++s) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), result.v[static_cast<std::size_t>(s)]);
    os << s << ',';
    os.write(buf, r.ptr - buf);
    os << ',' << result.greedy[static_cast<std::size_t>(s)] << '\n';
  }
}

}  // namespace mcplan
