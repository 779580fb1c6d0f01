#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "ntp/star.hpp"

using namespace ntp;
using namespace ntp_tests;

namespace {

Trajectory make_traj(const std::vector<std::pair<std::string, std::string>>& steps,
                     bool with_thought = false) {
  Trajectory t;
  t.theorem_id = "t";
  t.success = true;
  for (const auto& [state, tactic] : steps) {
    ProofStep s;
    s.state.goals_text = state;
    s.state.n_goals = 1;
    if (with_thought) s.thought = Thought{"because " + tactic};
    s.tactic.text = tactic;
    t.steps.push_back(std::move(s));
  }
  return t;
}

std::string temp_dir(const std::string& leaf) {
  auto p = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("dedup_pairs removes exact duplicates, keeps first-occurrence order") {
  std::vector<Trajectory> trajs = {make_traj({{"s1", "r1"}, {"s2", "r2"}}),
                                   make_traj({{"s1", "r1"}, {"s3", "r1"}})};
  auto out = dedup_pairs(trajs, 2);
  REQUIRE(out.size() == 3);
  CHECK(out[0].state_text == "s1");
  CHECK(out[1].state_text == "s2");
  CHECK(out[2].state_text == "s3");
  CHECK(out[0].provenance == Provenance::StarIter);
  CHECK(out[0].star_iteration == 2);
}

TEST_CASE("dedup_pairs distinguishes thought presence and content") {
  std::vector<Trajectory> trajs = {make_traj({{"s", "r1"}}, false),
                                   make_traj({{"s", "r1"}}, true)};
  CHECK(dedup_pairs(trajs).size() == 2);  // same (state, tactic), different thought field
}

TEST_CASE("dedup_pairs equals a set oracle on random trajectories") {
  std::mt19937_64 rng(7);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 500; ++i) {
    std::vector<std::pair<std::string, std::string>> steps;
    int n = 1 + static_cast<int>(rng() % 4);
    for (int j = 0; j < n; ++j)
      steps.emplace_back("s" + std::to_string(rng() % 30), "r" + std::to_string(rng() % 4));
    trajs.push_back(make_traj(steps, rng() % 2 == 0));
  }
  auto out = dedup_pairs(trajs);

  std::set<std::tuple<std::string, std::string, std::string>> oracle;
  for (const auto& t : trajs)
    for (const auto& s : t.steps)
      oracle.insert({s.state.goals_text, s.thought ? s.thought->text : "\x01none",
                     s.tactic.text});
  CHECK(out.size() == oracle.size());
  for (const auto& ex : out)
    CHECK(oracle.count({ex.state_text, ex.thought_text ? *ex.thought_text : "\x01none",
                        ex.tactic_text}) == 1);

  // idempotence: feeding the deduped pairs back through changes nothing
  std::vector<Trajectory> again(1);
  for (const auto& ex : out) {
    ProofStep s;
    s.state.goals_text = ex.state_text;
    if (ex.thought_text) s.thought = Thought{*ex.thought_text};
    s.tactic.text = ex.tactic_text;
    again[0].steps.push_back(std::move(s));
  }
  CHECK(dedup_pairs(again).size() == out.size());
}

TEST_CASE("dataset file round trip") {
  std::string dir = temp_dir("ntp_star_rt");
  std::vector<TrainingExample> ds = {
      {"⊢ a", std::nullopt, "r1", Provenance::StarIter, 1},
      {"⊢ b", std::string("thinking"), "r2", Provenance::StarIter, 1}};
  write_dataset_file(dir + "/ds.jsonl", ds);
  auto back = read_dataset_file(dir + "/ds.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == ds[0]);
  CHECK(back[1] == ds[1]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("assemble_dataset joint mode: thought data is a prefix, cross-dedup applies") {
  std::string dir = temp_dir("ntp_star_joint");
  std::vector<TrainingExample> dt = {{"s1", std::nullopt, "r1", Provenance::OracleAnnotated, 0},
                                     {"s2", std::nullopt, "r2", Provenance::OracleAnnotated, 0}};
  std::vector<TrainingExample> di = {{"s1", std::nullopt, "r1", Provenance::StarIter, 1},
                                     {"s3", std::nullopt, "r1", Provenance::StarIter, 1}};
  std::string path = assemble_dataset(DatasetMode::Joint, &dt, di, dir + "/joint.jsonl");
  auto merged = read_dataset_file(path);
  REQUIRE(merged.size() == 3);  // the duplicate (s1, r1) came only once
  CHECK(merged[0].state_text == "s1");
  CHECK(merged[1].state_text == "s2");
  CHECK(merged[2].state_text == "s3");

  json manifest;
  {
    std::ifstream in(path + ".manifest.json");
    REQUIRE(in.good());
    in >> manifest;
  }
  CHECK(manifest.at("mode") == "joint");
  CHECK(manifest.at("lines") == 3);
  CHECK(manifest.at("thought_dataset_lines") == 2);
  CHECK(manifest.at("iteration_lines") == 2);
  CHECK(manifest.at("content_hash").get<std::string>().size() == 16);
  std::filesystem::remove_all(dir);
}

TEST_CASE("assemble_dataset continue mode ignores the thought dataset") {
  std::string dir = temp_dir("ntp_star_cont");
  std::vector<TrainingExample> di = {{"s3", std::nullopt, "r1", Provenance::StarIter, 1}};
  std::string path = assemble_dataset(DatasetMode::Continue, nullptr, di, dir + "/cont.jsonl");
  CHECK(read_dataset_file(path).size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("joint mode without a thought dataset is an error") {
  CHECK_THROWS_AS(assemble_dataset(DatasetMode::Joint, nullptr, {}, "/tmp/ntp_nope.jsonl"),
                  MissingDT);
}

TEST_CASE("collect_iteration keeps only replay-verified successes") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r1", 0.7}, {"r2", 0.3}});
  IterationConfig cfg;
  cfg.budget.k_attempts = 4;
  cfg.budget.n_max = 6;
  std::vector<Theorem> problems = {{"p1", "ab", {}}, {"p2", "aabb", {}}, {"p3", "aba", {}}};
  auto [trajs, report] = collect_iteration(cfg, problems, env, gen, 17);
  CHECK(report.problems_attempted == 3);
  CHECK(report.problems_solved == 2);  // "aba" is unbalanced, hence unsolvable
  CHECK(report.success_rate == doctest::Approx(2.0 / 3.0));
  for (const auto& t : trajs) {
    CHECK(t.success);
    std::vector<Tactic> tactics;
    for (const auto& s : t.steps) tactics.push_back(s.tactic);
    Theorem thm{t.theorem_id, t.theorem_id == "p1" ? "ab" : "aabb", {}};
    CHECK(env.replay(thm, tactics));
  }
}

TEST_CASE("run_iterations: two iterations with the count-policy trainer") {
  std::string dir = temp_dir("ntp_star_run");
  ToyProverEnv env(ab_rules());
  IterationConfig cfg;
  cfg.out_dir = dir;
  cfg.dataset_mode = DatasetMode::Continue;
  cfg.budget.k_attempts = 8;
  cfg.budget.n_max = 6;
  std::vector<Theorem> problems = {{"p1", "ab", {}}, {"p2", "aabb", {}}, {"p3", "abba", {}}};
  std::vector<TrainingExample> seed_ds = {{"ab", std::nullopt, "r1", Provenance::Sft, 0}};
  auto policy = fit_count_policy(seed_ds, ab_rules());

  auto reports = run_iterations(2, cfg, problems, env, policy, nullptr,
                                count_policy_trainer(ab_rules()), 23);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].iteration_index == 1);
  CHECK(reports[1].iteration_index == 2);
  for (const auto& r : reports) {
    CHECK(std::filesystem::exists(r.dataset_path));
    CHECK(std::filesystem::exists(r.dataset_path + ".manifest.json"));
    CHECK(r.pairs_after_dedup <= r.pairs_collected);
    CHECK(r.pairs_after_dedup == static_cast<std::int64_t>(
                                     read_dataset_file(r.dataset_path).size()));
  }
  CHECK(reports[1].success_rate >= reports[0].success_rate);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_iterations: n_iters=0 yields an empty report list") {
  std::string dir = temp_dir("ntp_star_zero");
  ToyProverEnv env(ab_rules());
  IterationConfig cfg;
  cfg.out_dir = dir;
  auto policy = fit_count_policy({{"ab", std::nullopt, "r1", Provenance::Sft, 0}}, ab_rules());
  auto reports = run_iterations(0, cfg, {}, env, policy, nullptr,
                                count_policy_trainer(ab_rules()), 1);
  CHECK(reports.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_iterations: failing trainer command ends the run, artifacts intact") {
  std::string dir = temp_dir("ntp_star_fail");
  ToyProverEnv env(ab_rules());
  IterationConfig cfg;
  cfg.out_dir = dir;
  cfg.dataset_mode = DatasetMode::Continue;
  cfg.budget.k_attempts = 2;
  cfg.budget.n_max = 4;
  std::vector<Theorem> problems = {{"p1", "ab", {}}};
  auto policy = fit_count_policy({{"ab", std::nullopt, "r1", Provenance::Sft, 0}}, ab_rules());

  auto reports = run_iterations(2, cfg, problems, env, policy, nullptr,
                                command_trainer("false # {dataset}", policy), 1);
  CHECK(reports.empty());  // trainer failed on iteration 1
  CHECK(std::filesystem::exists(dir + "/iter1.jsonl"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("command_trainer substitutes placeholders") {
  std::string dir = temp_dir("ntp_star_cmd");
  ToyProverEnv env(ab_rules());
  auto policy = fit_count_policy({{"ab", std::nullopt, "r1", Provenance::Sft, 0}}, ab_rules());
  auto trainer = command_trainer("cp {dataset} {out_dir}/copy_iter{iteration}.jsonl", policy);

  std::vector<TrainingExample> ds = {{"s", std::nullopt, "r1", Provenance::StarIter, 1}};
  write_dataset_file(dir + "/in.jsonl", ds);
  auto next = trainer(dir + "/in.jsonl", dir, 7);
  CHECK(next == policy);  // serving handle unchanged
  CHECK(std::filesystem::exists(dir + "/copy_iter7.jsonl"));
  std::filesystem::remove_all(dir);
}
