#ifndef NTP_EVAL_HPP
#define NTP_EVAL_HPP

#include <algorithm>
#include <atomic>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ntp/core.hpp"
#include "ntp/search.hpp"

namespace ntp {

struct EmptyProblemSet : std::runtime_error {
  EmptyProblemSet() : std::runtime_error("problem set is empty") {}
};
struct InsufficientAttempts : std::runtime_error {
  explicit InsufficientAttempts(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Decoding { Search, Sampling };

struct SplitCell {
  std::int64_t solved = 0;
  std::int64_t total = 0;
};

struct EvalRow {
  std::string approach;
  Decoding decoding = Decoding::Sampling;
  SearchBudget budget;
  double pass_rate = 0.0;
  std::int64_t solved_total = 0;
  std::int64_t problem_total = 0;
  std::map<std::pair<std::string, std::string>, SplitCell> split_counts;
};

// Problem sets: JSON-lines {id, statement, source, level}.
inline std::vector<Theorem> load_problem_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem set " + path);
  std::vector<Theorem> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Theorem t;
    t.id = j.at("id").get<std::string>();
    t.statement = j.at("statement").get<std::string>();
    if (j.contains("source")) t.metadata["source"] = j.at("source").get<std::string>();
    if (j.contains("level")) t.metadata["level"] = j.at("level").get<std::string>();
    out.push_back(std::move(t));
  }
  return out;
}

// Runs the chosen procedure over the whole set. Problems run concurrently
// up to `workers`; results are collected in problem order so the run is
// reproducible under (seed, toy prover, scripted generator).
inline std::vector<SearchResult> run_problem_set(const std::vector<Theorem>& problems,
                                                 ProverEnv& env, Generator& gen,
                                                 const SearchBudget& budget, Decoding decoding,
                                                 const SearchOptions& options,
                                                 std::uint64_t run_seed, int workers = 1) {
  if (problems.empty()) throw EmptyProblemSet();
  std::vector<SearchResult> results(problems.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= problems.size()) return;
      results[i] = decoding == Decoding::Sampling
                       ? sampling_search(problems[i], env, gen, budget, options, run_seed)
                       : best_first_search(problems[i], env, gen, budget, options, run_seed);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::future<void>> futs;
    for (int w = 0; w < workers; ++w) futs.push_back(std::async(std::launch::async, work));
    for (auto& f : futs) f.get();
  }
  return results;
}

inline std::pair<std::string, std::string> split_key_of(const Theorem& t) {
  auto src = t.metadata.find("source");
  auto lvl = t.metadata.find("level");
  if (src == t.metadata.end())
    return {"uncategorized", ""};
  return {src->second, lvl == t.metadata.end() ? "" : lvl->second};
}

inline EvalRow make_eval_row(const std::string& approach, Decoding decoding,
                             const SearchBudget& budget, const std::vector<Theorem>& problems,
                             const std::vector<SearchResult>& results) {
  EvalRow row;
  row.approach = approach;
  row.decoding = decoding;
  row.budget = budget;
  row.problem_total = static_cast<std::int64_t>(problems.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& cell = row.split_counts[split_key_of(problems[i])];
    ++cell.total;
    if (results[i].solved) {
      ++cell.solved;
      ++row.solved_total;
    }
  }
  row.pass_rate = row.problem_total == 0
                      ? 0.0
                      : static_cast<double>(row.solved_total) /
                            static_cast<double>(row.problem_total);
  return row;
}

inline EvalRow run_eval(const std::string& approach, const std::vector<Theorem>& problems,
                        ProverEnv& env, Generator& gen, const SearchBudget& budget,
                        Decoding decoding, const SearchOptions& options, std::uint64_t run_seed,
                        std::vector<SearchResult>* log_out = nullptr, int workers = 1) {
  auto results = run_problem_set(problems, env, gen, budget, decoding, options, run_seed, workers);
  EvalRow row = make_eval_row(approach, decoding, budget, problems, results);
  if (log_out) *log_out = std::move(results);
  return row;
}

// Per-(source, level) solved/total table, totals row last. Unknown metadata
// lands in "uncategorized".
inline std::string render_breakdown_text(const EvalRow& row) {
  std::ostringstream out;
  std::size_t w = 14;
  for (const auto& [key, _] : row.split_counts)
    w = std::max(w, key.first.size() + key.second.size() + 1);
  out << std::left;
  for (const auto& [key, cell] : row.split_counts) {
    std::string label = key.second.empty() ? key.first : key.first + " " + key.second;
    out.width(static_cast<std::streamsize>(w + 2));
    out << label;
    out << cell.solved << "/" << cell.total << "\n";
  }
  out.width(static_cast<std::streamsize>(w + 2));
  out << "TOTAL";
  out << row.solved_total << "/" << row.problem_total << "\n";
  return out.str();
}

inline std::string render_breakdown_csv(const EvalRow& row) {
  std::ostringstream out;
  out << "source,level,solved,total\n";
  for (const auto& [key, cell] : row.split_counts)
    out << key.first << "," << key.second << "," << cell.solved << "," << cell.total << "\n";
  out << "TOTAL,," << row.solved_total << "," << row.problem_total << "\n";
  return out.str();
}

inline std::string render_eval_row_text(const EvalRow& row) {
  std::ostringstream out;
  out << row.approach << "  decoding=" << (row.decoding == Decoding::Sampling ? "sampling" : "search")
      << "  N=" << row.budget.n_max << "  K=" << row.budget.k_attempts
      << "  S=" << row.budget.s_expansions << "  T=" << row.budget.temperature
      << "  pass_rate=" << row.pass_rate << "  (" << row.solved_total << "/" << row.problem_total
      << ")\n";
  return out.str();
}

// pass@k on attempt prefixes: a problem counts at k if one of its first k
// attempts succeeded. Literal repetition, no combinatorial estimator.
inline std::vector<std::pair<int, double>> scaling_curve(const std::vector<SearchResult>& log,
                                                         const std::vector<int>& ks) {
  if (log.empty()) throw EmptyProblemSet();
  int k_max = 0;
  for (int k : ks) k_max = std::max(k_max, k);
  for (const auto& r : log)
    if (static_cast<int>(r.attempts.size()) < k_max)
      throw InsufficientAttempts(r.theorem_id + " has only " +
                                 std::to_string(r.attempts.size()) + " attempts, need " +
                                 std::to_string(k_max));
  std::vector<std::pair<int, double>> curve;
  for (int k : ks) {
    int solved = 0;
    for (const auto& r : log) {
      for (int i = 0; i < k; ++i) {
        if (r.attempts[static_cast<std::size_t>(i)].success) {
          ++solved;
          break;
        }
      }
    }
    curve.emplace_back(k, static_cast<double>(solved) / static_cast<double>(log.size()));
  }
  return curve;
}

inline void write_trajectory_log(const std::string& path, const std::vector<SearchResult>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory log " + path);
  for (const auto& r : log)
    for (const auto& t : r.attempts) out << trajectory_to_json(t).dump() << "\n";
}

// Rebuilds per-problem results from a saved log, grouping consecutive lines
// by theorem id. Used by replay-mode reporting.
inline std::vector<SearchResult> read_trajectory_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trajectory log " + path);
  std::vector<SearchResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Trajectory t = trajectory_from_json(json::parse(line));
    if (out.empty() || out.back().theorem_id != t.theorem_id) {
      SearchResult r;
      r.theorem_id = t.theorem_id;
      out.push_back(std::move(r));
    }
    SearchResult& r = out.back();
    r.solved = r.solved || t.success;
    r.generator_calls_total += t.generator_calls;
    if (t.success) r.proofs.push_back(t);
    r.attempts.push_back(std::move(t));
    r.k_used = static_cast<int>(r.attempts.size());
  }
  return out;
}

}  // namespace ntp

#endif  // NTP_EVAL_HPP
