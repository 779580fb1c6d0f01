#ifndef NTP_SEARCH_HPP
#define NTP_SEARCH_HPP

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "ntp/core.hpp"
#include "ntp/generator.hpp"
#include "ntp/prover.hpp"

namespace ntp {

struct MixedBudgets : std::runtime_error {
  MixedBudgets() : std::runtime_error("results were produced under different K budgets") {}
};

// The paper-literal frontier order prefers the least probable prefix; the
// standard order (default) expands the most probable one.
enum class PriorityMode { Standard, Literal };

struct SearchOptions {
  PriorityMode priority = PriorityMode::Standard;
  GenMode mode = GenMode::Direct;
  bool dedup_states = false;  // skip re-expanding an already-expanded goals_text
};

struct SearchResult {
  std::string theorem_id;
  std::vector<Trajectory> attempts;
  bool solved = false;
  std::vector<Trajectory> proofs;  // successes only, capped
  std::int64_t generator_calls_total = 0;
  int k_used = 0;
};

// Per-expansion record for auditing best-first runs: the popped node and the
// exact samples drawn there. An independent priority-queue simulation can
// replay this log to verify the expansion order.
struct BfsTrace {
  struct Expansion {
    std::string state_text;
    double cum_logprob = 0.0;
    std::vector<GenSample> samples;
  };
  std::vector<Expansion> expansions;
};

// Counter-based seed derivation: attempts are independent streams, yet the
// whole run is reproducible from one seed.
inline std::uint64_t derive_seed(std::uint64_t run_seed, const std::string& theorem_id,
                                 std::uint64_t attempt_index) {
  std::uint64_t h = 14695981039346656037ull ^ run_seed;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
    h ^= h >> 33;
  };
  for (unsigned char c : theorem_id) mix(c);
  mix(attempt_index + 0x9e3779b97f4a7c15ull);
  return h;
}

namespace detail {

inline std::vector<Tactic> tactics_of(const Trajectory& t) {
  std::vector<Tactic> out;
  out.reserve(t.steps.size());
  for (const auto& s : t.steps) out.push_back(s.tactic);
  return out;
}

// Keeps the success only if it replays in a fresh session.
inline void record_attempt(SearchResult& result, ProverEnv& env, const Theorem& theorem,
                           Trajectory traj, const SearchBudget& budget) {
  if (traj.success && !env.replay(theorem, tactics_of(traj))) traj.success = false;
  if (traj.success &&
      static_cast<int>(result.proofs.size()) < budget.max_proofs_per_problem)
    result.proofs.push_back(traj);
  result.solved = result.solved || traj.success;
  result.generator_calls_total += traj.generator_calls;
  result.attempts.push_back(std::move(traj));
}

struct Deadline {
  std::chrono::steady_clock::time_point end;
  bool enabled = false;

  explicit Deadline(std::int64_t timeout_ms) {
    if (timeout_ms > 0) {
      enabled = true;
      end = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    }
  }
  bool expired() const { return enabled && std::chrono::steady_clock::now() >= end; }
};

}  // namespace detail

// Best-first search: expand the frontier node with the best cumulative
// avg-logprob, draw S tactics there, spawn a child per distinct legal
// tactic. One attempt stops on success, after N expansions, or at the
// problem deadline; K independent attempts feed pass@K.
inline SearchResult best_first_search(const Theorem& theorem, ProverEnv& env, Generator& gen,
                                      const SearchBudget& budget,
                                      const SearchOptions& options = {},
                                      std::uint64_t run_seed = 0,
                                      BfsTrace* trace = nullptr) {
  SearchResult result;
  result.theorem_id = theorem.id;
  result.k_used = budget.k_attempts;

  struct Node {
    ProofState state;
    double cum_logprob = 0.0;
    int depth = 0;
    int parent = -1;
    std::optional<ProofStep> producing_step;
  };

  detail::Deadline deadline(budget.per_problem_timeout_ms);

  for (int attempt = 0; attempt < budget.k_attempts; ++attempt) {
    std::mt19937_64 rng(derive_seed(run_seed, theorem.id, attempt));
    auto t0 = std::chrono::steady_clock::now();
    Trajectory traj;
    traj.theorem_id = theorem.id;

    try {
      auto session = env.open_session();
      std::vector<Node> nodes;
      nodes.push_back(Node{session->init_theorem(theorem), 0.0, 0, -1, std::nullopt});

      // Frontier keyed by (priority, insertion order): FIFO among ties.
      auto better = [&](double a, double b) {
        return options.priority == PriorityMode::Standard ? a > b : a < b;
      };
      std::vector<std::pair<int, std::int64_t>> frontier;  // (node idx, insertion seq)
      std::int64_t seq = 0;
      frontier.emplace_back(0, seq++);
      std::set<std::string> expanded_goals;

      int expansions = 0;
      int finish_node = -1;
      Tactic finish_tactic;
      std::optional<ProofStep> finish_step;

      while (!frontier.empty() && expansions < budget.n_max && finish_node < 0 &&
             !deadline.expired()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < frontier.size(); ++i) {
          const Node& a = nodes[frontier[i].first];
          const Node& b = nodes[frontier[best].first];
          if (better(a.cum_logprob, b.cum_logprob) ||
              (a.cum_logprob == b.cum_logprob && frontier[i].second < frontier[best].second))
            best = i;
        }
        int cur = frontier[best].first;
        frontier.erase(frontier.begin() + best);

        if (options.dedup_states && !expanded_goals.insert(nodes[cur].state.goals_text).second)
          continue;

        GenRequest req;
        req.state_text = nodes[cur].state.goals_text;
        req.mode = options.mode;
        req.n = budget.s_expansions;
        req.temperature = budget.temperature;
        auto samples = gen.generate(req, rng);
        ++expansions;
        traj.generator_calls += budget.s_expansions;
        if (trace)
          trace->expansions.push_back(
              {nodes[cur].state.goals_text, nodes[cur].cum_logprob, samples});

        std::set<std::string> seen_tactics;  // duplicates within one expansion apply once
        for (const auto& s : samples) {
          if (s.error) continue;
          if (!seen_tactics.insert(s.tactic.text).second) continue;
          TacticOutcome out = session->apply_tactic(nodes[cur].state, s.tactic,
                                                    budget.per_problem_timeout_ms);
          ProofStep step{nodes[cur].state, s.thought, s.tactic, s.avg_logprob};
          if (out.kind == TacticOutcome::Kind::ProofFinished) {
            finish_node = cur;
            finish_step = step;
            break;
          }
          if (out.kind == TacticOutcome::Kind::NewState) {
            nodes.push_back(Node{out.state, nodes[cur].cum_logprob + s.avg_logprob,
                                 nodes[cur].depth + 1, cur, step});
            frontier.emplace_back(static_cast<int>(nodes.size()) - 1, seq++);
          }
          // TacticError / Timeout: child not spawned
        }
      }

      if (finish_node >= 0) {
        std::vector<ProofStep> path;
        for (int i = finish_node; i >= 0; i = nodes[i].parent)
          if (nodes[i].producing_step) path.push_back(*nodes[i].producing_step);
        traj.steps.assign(path.rbegin(), path.rend());
        traj.steps.push_back(*finish_step);
        traj.success = true;
      }
    } catch (const EnvUnavailable&) {
      traj.success = false;
    } catch (const BackendUnavailable&) {
      traj.success = false;
    }

    // Wall clock is tracked only under a timeout budget; otherwise timing has
    // no behavioral effect and logs stay reproducible.
    if (deadline.enabled)
      traj.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    detail::record_attempt(result, env, theorem, std::move(traj), budget);
  }
  return result;
}

// The sampling method: K independent root-to-leaf rollouts. Every generator
// call counts against N, legal or not; an illegal or malformed tactic is
// discarded and regenerated from the same state.
inline SearchResult sampling_search(const Theorem& theorem, ProverEnv& env, Generator& gen,
                                    const SearchBudget& budget,
                                    const SearchOptions& options = {},
                                    std::uint64_t run_seed = 0) {
  SearchResult result;
  result.theorem_id = theorem.id;
  result.k_used = budget.k_attempts;

  detail::Deadline deadline(budget.per_problem_timeout_ms);

  for (int attempt = 0; attempt < budget.k_attempts; ++attempt) {
    std::mt19937_64 rng(derive_seed(run_seed, theorem.id, attempt));
    auto t0 = std::chrono::steady_clock::now();
    Trajectory traj;
    traj.theorem_id = theorem.id;

    try {
      auto session = env.open_session();
      ProofState state = session->init_theorem(theorem);
      while (traj.generator_calls < budget.n_max && !deadline.expired()) {
        GenRequest req;
        req.state_text = state.goals_text;
        req.mode = options.mode;
        req.n = 1;
        req.temperature = budget.temperature;
        auto samples = gen.generate(req, rng);
        ++traj.generator_calls;
        if (samples.empty() || samples.front().error) continue;
        const GenSample& s = samples.front();
        TacticOutcome out =
            session->apply_tactic(state, s.tactic, budget.per_problem_timeout_ms);
        if (out.kind == TacticOutcome::Kind::ProofFinished) {
          traj.steps.push_back(ProofStep{state, s.thought, s.tactic, s.avg_logprob});
          traj.success = true;
          break;
        }
        if (out.kind == TacticOutcome::Kind::NewState) {
          traj.steps.push_back(ProofStep{state, s.thought, s.tactic, s.avg_logprob});
          state = out.state;
        }
        // TacticError / Timeout: resample from the same state
      }
    } catch (const EnvUnavailable&) {
      traj.success = false;
    } catch (const BackendUnavailable&) {
      traj.success = false;
    }

    if (deadline.enabled)
      traj.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    detail::record_attempt(result, env, theorem, std::move(traj), budget);
  }
  return result;
}

// Fraction of theorems with at least one successful attempt. All results
// must come from the same K.
inline double pass_at_k(const std::vector<SearchResult>& results) {
  if (results.empty()) return 0.0;
  int k = results.front().k_used;
  int solved = 0;
  for (const auto& r : results) {
    if (r.k_used != k) throw MixedBudgets();
    if (r.solved) ++solved;
  }
  return static_cast<double>(solved) / static_cast<double>(results.size());
}

}  // namespace ntp

#endif  // NTP_SEARCH_HPP
