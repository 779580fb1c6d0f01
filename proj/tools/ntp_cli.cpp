// Command-line front end tying the engine together: annotation, search,
// sampling, expert iteration, evaluation, and report re-rendering over a
// persistent run store.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "ntp/annotate.hpp"
#include "ntp/bridge.hpp"
#include "ntp/config.hpp"
#include "ntp/core.hpp"
#include "ntp/eval.hpp"
#include "ntp/generator.hpp"
#include "ntp/http_gen.hpp"
#include "ntp/prover.hpp"
#include "ntp/search.hpp"
#include "ntp/star.hpp"
#include "ntp/store.hpp"

namespace {

using namespace ntp;

std::unique_ptr<ProverEnv> make_env(const Config& cfg) {
  if (cfg.prover.kind == "bridge") {
    if (cfg.prover.bridge_cmd.empty())
      throw SchemaViolation("prover.bridge_cmd", "required for the bridge prover");
    return std::make_unique<BridgeProverEnv>(cfg.prover.bridge_cmd);
  }
  if (cfg.prover.rules.empty())
    throw SchemaViolation("prover.rules", "required for the toy prover");
  return std::make_unique<ToyProverEnv>(load_rule_file(cfg.prover.rules));
}

std::shared_ptr<Generator> make_generator(const Config& cfg) {
  if (cfg.generator.backend == "http")
    return std::make_shared<HttpGenerator>(cfg.generator.url, cfg.generator.max_in_flight,
                                           cfg.generator.tactic_marker);
  if (cfg.generator.backend == "count") {
    if (cfg.generator.seed_dataset.empty())
      throw SchemaViolation("generator.seed_dataset", "required for the count backend");
    if (cfg.prover.rules.empty())
      throw SchemaViolation("prover.rules", "count backend needs the toy rule set");
    return fit_count_policy(read_dataset_file(cfg.generator.seed_dataset),
                            load_rule_file(cfg.prover.rules));
  }
  if (cfg.generator.table.empty())
    throw SchemaViolation("generator.table", "required for the scripted backend");
  std::vector<std::pair<std::string, double>> table(cfg.generator.table.begin(),
                                                    cfg.generator.table.end());
  return std::make_shared<ScriptedGenerator>(std::move(table));
}

SearchOptions make_options(const Config& cfg) {
  SearchOptions opt;
  opt.priority =
      cfg.search.priority == "literal" ? PriorityMode::Literal : PriorityMode::Standard;
  opt.mode = cfg.generator.mode == "thought" ? GenMode::ThoughtAugmented : GenMode::Direct;
  opt.dedup_states = cfg.search.dedup_states;
  return opt;
}

SearchBudget eval_budget(const Config& cfg) {
  SearchBudget b;
  b.n_max = cfg.eval.n_max;
  b.k_attempts = cfg.eval.k_attempts;
  b.s_expansions = cfg.eval.s_expansions;
  b.temperature = cfg.eval.temperature;
  b.per_problem_timeout_ms = cfg.eval.timeout_ms;
  b.max_proofs_per_problem = cfg.eval.max_proofs;
  return b;
}

int run_set_command(const Config& cfg, std::uint64_t seed, const std::string& problems_path,
                    const std::string& store_root, Decoding decoding,
                    const std::string& approach) {
  auto problems = load_problem_set(problems_path);
  auto env = make_env(cfg);
  auto gen = make_generator(cfg);
  SearchBudget budget = eval_budget(cfg);
  if (decoding == Decoding::Sampling) budget.s_expansions = 1;

  RunStore store(store_root);
  std::string id = store.open_run(cfg, seed);
  std::vector<SearchResult> log;
  EvalRow row = run_eval(approach, problems, *env, *gen, budget, decoding, make_options(cfg),
                         seed, &log, cfg.search.workers);

  write_trajectory_log(store.artifact_path("trajectories.jsonl"), log);
  {
    std::ofstream out(store.artifact_path("reports/summary.txt"));
    out << render_eval_row_text(row) << "\n" << render_breakdown_text(row);
  }
  {
    std::ofstream out(store.artifact_path("reports/breakdown.csv"));
    out << render_breakdown_csv(row);
  }
  store.write_manifest();

  std::cout << "run " << id << "\n" << render_eval_row_text(row);
  std::cout << render_breakdown_text(row);
  return 0;
}

std::vector<StateTacticPair> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file " + path);
  std::vector<StateTacticPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    pairs.emplace_back(j.at("state").get<std::string>(), j.at("tactic").get<std::string>());
  }
  return pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thought-augmented proof search and expert iteration engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string store_root = "runs";
  app.add_option("--config", config_path, "JSON config, merged over defaults");
  app.add_option("--seed", seed, "seed for all randomness");
  app.add_option("--run-store", store_root, "run store root directory");

  std::string problems_path;
  auto* cmd_search = app.add_subcommand("search", "best-first search over a problem set");
  cmd_search->add_option("--problems", problems_path)->required();
  auto* cmd_sample = app.add_subcommand("sample", "sampling search over a problem set");
  cmd_sample->add_option("--problems", problems_path)->required();

  std::string decoding_str = "sampling";
  auto* cmd_eval = app.add_subcommand("eval", "evaluation run with reports");
  cmd_eval->add_option("--problems", problems_path)->required();
  cmd_eval->add_option("--decoding", decoding_str)->check(CLI::IsMember({"sampling", "search"}));

  auto* cmd_star = app.add_subcommand("star", "expert-iteration loop");
  cmd_star->add_option("--problems", problems_path)->required();

  std::string pairs_path, out_path, ledger_path;
  auto* cmd_annotate = app.add_subcommand("annotate", "retrospective rationale annotation");
  cmd_annotate->add_option("--pairs", pairs_path, "JSONL of {state, tactic}")->required();
  cmd_annotate->add_option("--out", out_path, "output dataset path")->required();
  cmd_annotate->add_option("--ledger", ledger_path, "resumable completion ledger");

  std::string log_path, ks_str = "1,2,4,8,16,32";
  auto* cmd_report = app.add_subcommand("report", "re-render reports from a trajectory log");
  cmd_report->add_option("--log", log_path)->required();
  cmd_report->add_option("--ks", ks_str, "comma-separated k values for pass@k");

  std::string statement;
  std::vector<std::string> tactics;
  auto* cmd_toyprove = app.add_subcommand("toyprove", "replay tactics on the toy prover");
  cmd_toyprove->add_option("--statement", statement)->required();
  cmd_toyprove->add_option("tactics", tactics, "tactics to apply in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = ntp::load_config(config_path);

    if (cmd_search->parsed())
      return run_set_command(cfg, seed, problems_path, store_root, Decoding::Search, "search");
    if (cmd_sample->parsed())
      return run_set_command(cfg, seed, problems_path, store_root, Decoding::Sampling, "sample");
    if (cmd_eval->parsed())
      return run_set_command(cfg, seed, problems_path, store_root,
                             decoding_str == "search" ? Decoding::Search : Decoding::Sampling,
                             "eval");

    if (cmd_star->parsed()) {
      auto problems = load_problem_set(problems_path);
      auto env = make_env(cfg);
      auto gen = make_generator(cfg);

      RunStore store(store_root);
      std::string id = store.open_run(cfg, seed);

      IterationConfig icfg;
      icfg.budget.n_max = cfg.star.n_max;
      icfg.budget.k_attempts = cfg.star.k_attempts;
      icfg.budget.temperature = cfg.star.temperature;
      icfg.budget.per_problem_timeout_ms = cfg.star.timeout_ms;
      icfg.budget.max_proofs_per_problem = cfg.star.max_proofs;
      icfg.dataset_mode =
          cfg.star.dataset_mode == "continue" ? DatasetMode::Continue : DatasetMode::Joint;
      icfg.gen_mode = cfg.generator.mode == "thought" ? GenMode::ThoughtAugmented : GenMode::Direct;
      icfg.out_dir = store.run_dir() + "/datasets";

      std::vector<TrainingExample> thought_dataset;
      const std::vector<TrainingExample>* dt = nullptr;
      if (icfg.dataset_mode == DatasetMode::Joint) {
        if (cfg.star.thought_dataset.empty())
          throw SchemaViolation("star.thought_dataset", "required for joint mode");
        thought_dataset = read_dataset_file(cfg.star.thought_dataset);
        dt = &thought_dataset;
      }

      TrainerHook trainer =
          cfg.star.trainer_cmd.empty()
              ? count_policy_trainer(load_rule_file(cfg.prover.rules))
              : command_trainer(cfg.star.trainer_cmd, gen);

      auto reports = run_iterations(cfg.star.iterations, icfg, problems, *env, gen, dt,
                                    trainer, seed);
      for (const auto& r : reports)
        std::cout << "iteration " << r.iteration_index << ": solved " << r.problems_solved << "/"
                  << r.problems_attempted << " (rate " << r.success_rate << "), pairs "
                  << r.pairs_collected << " -> " << r.pairs_after_dedup << ", dataset "
                  << r.dataset_path << "\n";
      store.write_manifest();
      return static_cast<int>(reports.size()) == cfg.star.iterations ? 0 : 1;
    }

    if (cmd_annotate->parsed()) {
      auto pairs = load_pairs(pairs_path);
      HttpOracleClient oracle(cfg.oracle.url);
      RetryPolicy retry;
      retry.transport_retries = cfg.oracle.transport_retries;
      retry.parse_regenerations = cfg.oracle.parse_regenerations;
      retry.failure_rate_ceiling = cfg.oracle.failure_rate_ceiling;
      std::unique_ptr<AnnotationLedger> ledger;
      if (!ledger_path.empty()) ledger = std::make_unique<AnnotationLedger>(ledger_path);
      auto [dataset, report] = annotate_corpus(pairs, oracle, cfg.oracle.concurrency, retry,
                                               ledger.get(), cfg.oracle.temperature);
      write_dataset_file(out_path, dataset);
      std::cout << "input=" << report.input << " filtered=" << report.filtered
                << " accepted=" << report.accepted << " mismatched=" << report.mismatched
                << " parse_failed=" << report.parse_failed
                << " transport_failed=" << report.transport_failed
                << " skipped=" << report.skipped_ledger << "\n";
      return 0;
    }

    if (cmd_report->parsed()) {
      auto log = read_trajectory_log(log_path);
      std::vector<int> ks;
      std::stringstream ss(ks_str);
      for (std::string tok; std::getline(ss, tok, ',');) ks.push_back(std::stoi(tok));
      for (auto [k, rate] : scaling_curve(log, ks))
        std::cout << "pass@" << k << " = " << rate << "\n";
      return 0;
    }

    if (cmd_toyprove->parsed()) {
      ToyProverEnv env(load_rule_file(cfg.prover.rules));
      auto session = env.open_session();
      Theorem thm{"cli", statement, {}};
      ProofState state = session->init_theorem(thm);
      std::cout << "state 0: " << state.goals_text << "\n";
      for (const auto& t : tactics) {
        TacticOutcome out = session->apply_tactic(state, Tactic{t}, 0);
        switch (out.kind) {
          case TacticOutcome::Kind::NewState:
            state = out.state;
            std::cout << t << " -> " << state.goals_text << "\n";
            break;
          case TacticOutcome::Kind::ProofFinished:
            std::cout << t << " -> no goals\n";
            return 0;
          case TacticOutcome::Kind::TacticError:
            std::cout << t << " -> error: " << out.message << "\n";
            return 1;
          case TacticOutcome::Kind::Timeout:
            std::cout << t << " -> timeout\n";
            return 1;
        }
      }
      std::cout << "goals remain\n";
      return 1;
    }
  } catch (const ntp::SchemaViolation& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
