#ifndef NTP_STAR_HPP
#define NTP_STAR_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "ntp/core.hpp"
#include "ntp/generator.hpp"
#include "ntp/prover.hpp"
#include "ntp/search.hpp"

namespace ntp {

struct MissingDT : std::runtime_error {
  MissingDT() : std::runtime_error("joint assembly requires the annotated thought dataset") {}
};
struct TrainerFailed : std::runtime_error {
  explicit TrainerFailed(const std::string& msg) : std::runtime_error(msg) {}
};

enum class DatasetMode { Joint, Continue };

struct IterationConfig {
  int iteration_index = 1;
  SearchBudget budget;       // defaults below follow the expert-iteration setup
  DatasetMode dataset_mode = DatasetMode::Joint;
  GenMode gen_mode = GenMode::Direct;
  std::string out_dir = "star_out";

  IterationConfig() {
    budget.n_max = 5;
    budget.k_attempts = 32;
    budget.temperature = 1.0;
    budget.per_problem_timeout_ms = 60000;
    budget.max_proofs_per_problem = 3;
  }
};

struct IterationReport {
  int iteration_index = 0;
  std::int64_t problems_attempted = 0;
  std::int64_t problems_solved = 0;
  std::int64_t pairs_collected = 0;
  std::int64_t pairs_after_dedup = 0;
  double success_rate = 0.0;  // empirical estimate of the expected reward
  std::string dataset_path;
};

// Samples every problem with the current policy and keeps only verified
// successes, at most max_proofs_per_problem each (first-found order).
inline std::pair<std::vector<Trajectory>, IterationReport> collect_iteration(
    const IterationConfig& cfg, const std::vector<Theorem>& problems, ProverEnv& env,
    Generator& gen, std::uint64_t run_seed) {
  IterationReport report;
  report.iteration_index = cfg.iteration_index;
  report.problems_attempted = static_cast<std::int64_t>(problems.size());
  std::vector<Trajectory> retained;
  SearchOptions options;
  options.mode = cfg.gen_mode;
  for (const auto& thm : problems) {
    SearchResult res = sampling_search(thm, env, gen, cfg.budget, options,
                                       derive_seed(run_seed, "iter", cfg.iteration_index));
    if (res.solved) ++report.problems_solved;
    for (auto& proof : res.proofs) retained.push_back(std::move(proof));
  }
  report.success_rate = problems.empty()
                            ? 0.0
                            : static_cast<double>(report.problems_solved) /
                                  static_cast<double>(problems.size());
  return {std::move(retained), report};
}

// Flattens trajectories to (state, thought, tactic) triples and removes
// exact duplicates, keeping first-occurrence order.
inline std::vector<TrainingExample> dedup_pairs(const std::vector<Trajectory>& trajectories,
                                                int star_iteration = 0) {
  std::vector<TrainingExample> out;
  std::unordered_set<std::string> seen;
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      TrainingExample ex;
      ex.state_text = step.state.goals_text;
      if (step.thought) ex.thought_text = step.thought->text;
      ex.tactic_text = step.tactic.text;
      ex.provenance = Provenance::StarIter;
      ex.star_iteration = star_iteration;
      std::string key = ex.state_text + '\x1f' + (ex.thought_text ? *ex.thought_text : "\x02") +
                        '\x1f' + ex.tactic_text;
      if (seen.insert(std::move(key)).second) out.push_back(std::move(ex));
    }
  }
  return out;
}

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string triple_key(const TrainingExample& ex) {
  return ex.state_text + '\x1f' + (ex.thought_text ? *ex.thought_text : "\x02") + '\x1f' +
         ex.tactic_text;
}

}  // namespace detail

inline void write_dataset_file(const std::string& path, const std::vector<TrainingExample>& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path);
  for (const auto& ex : ds)
    out << serialize_example(ex, ex.thought_text ? SerializationFormat::ThoughtAugmented
                                                 : SerializationFormat::Direct)
        << "\n";
}

inline std::vector<TrainingExample> read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset " + path);
  std::vector<TrainingExample> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(deserialize_example(line));
  return out;
}

// Joint mode: annotated thoughts first, then the iteration pairs with
// cross-dataset exact-triple dedup. Continue mode: the iteration pairs
// alone. Writes the JSON-lines file plus a manifest with counts and hashes.
inline std::string assemble_dataset(DatasetMode mode,
                                    const std::vector<TrainingExample>* thought_dataset,
                                    const std::vector<TrainingExample>& iter_dataset,
                                    const std::string& out_path) {
  std::vector<TrainingExample> merged;
  std::unordered_set<std::string> seen;
  if (mode == DatasetMode::Joint) {
    if (!thought_dataset) throw MissingDT();
    for (const auto& ex : *thought_dataset)
      if (seen.insert(detail::triple_key(ex)).second) merged.push_back(ex);
  }
  for (const auto& ex : iter_dataset)
    if (seen.insert(detail::triple_key(ex)).second) merged.push_back(ex);

  write_dataset_file(out_path, merged);

  std::string content_hash;
  {
    std::ifstream in(out_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(ss.str())));
    content_hash = buf;
  }
  json manifest{{"mode", mode == DatasetMode::Joint ? "joint" : "continue"},
                {"lines", merged.size()},
                {"thought_dataset_lines", thought_dataset ? thought_dataset->size() : 0},
                {"iteration_lines", iter_dataset.size()},
                {"content_hash", content_hash}};
  std::ofstream mout(out_path + ".manifest.json");
  mout << manifest.dump(2) << "\n";
  return out_path;
}

// Produces the next-iteration policy from the assembled dataset file.
// Returns null or throws on trainer failure.
using TrainerHook = std::function<std::shared_ptr<Generator>(
    const std::string& dataset_path, const std::string& out_dir, int iteration)>;

// In-repo trainer: refit the count policy on the dataset file.
inline TrainerHook count_policy_trainer(std::vector<RewriteRule> rules) {
  return [rules = std::move(rules)](const std::string& dataset_path, const std::string&,
                                    int) -> std::shared_ptr<Generator> {
    auto ds = read_dataset_file(dataset_path);
    if (ds.empty()) throw TrainerFailed("empty training dataset");
    return fit_count_policy(ds, rules);
  };
}

// External trainer: run a shell command with {dataset}/{out_dir}/{iteration}
// substituted. The serving policy is assumed to be updated out of band, so
// the same generator handle is reused.
inline TrainerHook command_trainer(std::string cmd_template, std::shared_ptr<Generator> gen) {
  return [cmd_template = std::move(cmd_template), gen](
             const std::string& dataset_path, const std::string& out_dir,
             int iteration) -> std::shared_ptr<Generator> {
    std::string cmd = cmd_template;
    auto subst = [&cmd](const std::string& key, const std::string& value) {
      for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key))
        cmd.replace(pos, key.size(), value);
    };
    subst("{dataset}", dataset_path);
    subst("{out_dir}", out_dir);
    subst("{iteration}", std::to_string(iteration));
    int rc = std::system(cmd.c_str());
    if (rc != 0) throw TrainerFailed("trainer command exited with " + std::to_string(rc));
    return gen;
  };
}

// The expert-iteration driver: collect -> dedup -> assemble -> train ->
// swap policy, n_iters times. A trainer failure ends the run with the
// reports gathered so far intact.
inline std::vector<IterationReport> run_iterations(
    int n_iters, IterationConfig cfg_template, const std::vector<Theorem>& problems,
    ProverEnv& env, std::shared_ptr<Generator> initial_policy,
    const std::vector<TrainingExample>* thought_dataset, TrainerHook trainer,
    std::uint64_t run_seed) {
  std::vector<IterationReport> reports;
  std::shared_ptr<Generator> policy = std::move(initial_policy);
  std::filesystem::create_directories(cfg_template.out_dir);

  for (int iter = 1; iter <= n_iters; ++iter) {
    IterationConfig cfg = cfg_template;
    cfg.iteration_index = iter;
    auto [trajectories, report] = collect_iteration(cfg, problems, env, *policy, run_seed);

    std::int64_t pairs = 0;
    for (const auto& t : trajectories) pairs += static_cast<std::int64_t>(t.steps.size());
    report.pairs_collected = pairs;

    auto deduped = dedup_pairs(trajectories, iter);
    report.pairs_after_dedup = static_cast<std::int64_t>(deduped.size());

    std::string path = cfg.out_dir + "/iter" + std::to_string(iter) + ".jsonl";
    report.dataset_path =
        assemble_dataset(cfg.dataset_mode, thought_dataset, deduped, path);

    std::shared_ptr<Generator> next;
    try {
      next = trainer(report.dataset_path, cfg.out_dir, iter);
    } catch (const TrainerFailed&) {
      return reports;  // prior artifacts stay on disk
    }
    if (!next) return reports;
    policy = std::move(next);
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace ntp

#endif  // NTP_STAR_HPP
