#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "ntp/search.hpp"
#include "search_oracle.hpp"

using namespace ntp;
using namespace ntp_tests;

static SearchBudget budget(int n, int k, int s = 1, double t = 0.0) {
  SearchBudget b;
  b.n_max = n;
  b.k_attempts = k;
  b.s_expansions = s;
  b.temperature = t;
  return b;
}

TEST_CASE("best-first solves aabb in two expansions with an always-r1 generator") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r1", 1.0}});
  auto res = best_first_search(Theorem{"t", "aabb", {}}, env, gen, budget(50, 1));
  CHECK(res.solved);
  REQUIRE(res.proofs.size() == 1);
  REQUIRE(res.proofs[0].steps.size() == 2);
  CHECK(res.proofs[0].steps[0].tactic.text == "r1");
  CHECK(res.proofs[0].steps[1].tactic.text == "r1");
  CHECK(res.generator_calls_total == 2);
}

TEST_CASE("best-first with N=1 cannot finish a depth-2 proof") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r1", 1.0}});
  for (int s : {1, 3}) {
    auto res = best_first_search(Theorem{"t", "aabb", {}}, env, gen, budget(1, 1, s));
    CHECK_FALSE(res.solved);
    CHECK(res.generator_calls_total == s);
  }
}

namespace {
// Emits the same fixed batch of samples on every call.
struct FixedBatchGen : Generator {
  std::vector<GenSample> batch;
  std::vector<GenSample> generate(const GenRequest&, std::mt19937_64&) override {
    return batch;
  }
};

FixedBatchGen two_branch_gen() {
  FixedBatchGen gen;
  GenSample a;
  a.tactic = Tactic{"ra"};
  a.avg_logprob = -0.25;
  a.raw_text = "ra";
  GenSample b;
  b.tactic = Tactic{"rb"};
  b.avg_logprob = -0.3;
  b.raw_text = "rb";
  gen.batch = {a, b};
  return gen;
}
}  // namespace

TEST_CASE("frontier prefers the higher cumulative logprob (-0.25 over -0.3)") {
  // Two branches from the root; the more probable child must expand first.
  std::vector<RewriteRule> rules = {{"ra", "aa", "x"}, {"rb", "ab", "y"}};
  ToyProverEnv env(rules);
  FixedBatchGen gen = two_branch_gen();
  BfsTrace trace;
  best_first_search(Theorem{"t", "aab", {}}, env, gen, budget(4, 1, 2), {}, 0, &trace);
  REQUIRE(trace.expansions.size() >= 2);
  CHECK(trace.expansions[0].state_text == "aab");
  // children: ra -> "xb" (cum -0.25), rb -> "ay" (cum -0.3)
  CHECK(trace.expansions[1].state_text == "xb");
  CHECK(trace.expansions[1].cum_logprob == doctest::Approx(-0.25));
  CHECK(bfs_trace_matches_simulation(trace, "aab", rules));
}

TEST_CASE("literal priority flag flips the frontier order") {
  std::vector<RewriteRule> rules = {{"ra", "aa", "x"}, {"rb", "ab", "y"}};
  ToyProverEnv env(rules);
  FixedBatchGen gen = two_branch_gen();
  SearchOptions opt;
  opt.priority = PriorityMode::Literal;
  BfsTrace trace;
  best_first_search(Theorem{"t", "aab", {}}, env, gen, budget(4, 1, 2), opt, 0, &trace);
  REQUIRE(trace.expansions.size() >= 2);
  CHECK(trace.expansions[1].state_text == "ay");  // least probable prefix first
  CHECK(bfs_trace_matches_simulation(trace, "aab", rules, /*literal=*/true));
}

TEST_CASE("best-first expansion order matches the priority-queue simulation") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    ToyProverEnv env(ab_rules());
    ScriptedGenerator gen({{"r1", 0.5 + 0.4 * (rng() % 100) / 100.0}, {"r2", 0.3}});
    std::string state = random_balanced_string(rng, 2 + static_cast<int>(rng() % 3));
    BfsTrace trace;
    best_first_search(Theorem{"t", state, {}}, env, gen, budget(10, 1, 2, 0.8), {}, rng(),
                      &trace);
    CHECK(bfs_trace_matches_simulation(trace, state, ab_rules()));
  }
}

TEST_CASE("sampling solves aabb at T=0 with two generator calls") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r1", 0.8}, {"r2", 0.2}});
  auto res = sampling_search(Theorem{"t", "aabb", {}}, env, gen, budget(50, 1));
  CHECK(res.solved);
  REQUIRE(res.proofs.size() == 1);
  CHECK(res.proofs[0].generator_calls == 2);
  REQUIRE(res.proofs[0].steps.size() == 2);
  CHECK(res.proofs[0].steps[0].tactic.text == "r1");
  CHECK(res.proofs[0].steps[1].tactic.text == "r1");
}

TEST_CASE("sampling burns the whole budget on illegal tactics") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r9", 1.0}});
  auto res = sampling_search(Theorem{"t", "aabb", {}}, env, gen, budget(5, 1));
  CHECK_FALSE(res.solved);
  REQUIRE(res.attempts.size() == 1);
  CHECK(res.attempts[0].generator_calls == 5);
}

TEST_CASE("sampling equals best-first (S=1) under a deterministic all-legal generator") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    std::string state = random_balanced_string(rng, 1 + static_cast<int>(rng() % 4));
    ToyProverEnv env(ab_rules());
    FirstApplicableGen gen(ab_rules());
    auto a = sampling_search(Theorem{"t", state, {}}, env, gen, budget(50, 1));
    auto b = best_first_search(Theorem{"t", state, {}}, env, gen, budget(50, 1));
    REQUIRE(a.attempts.size() == 1);
    REQUIRE(b.attempts.size() == 1);
    CHECK(a.solved == b.solved);
    REQUIRE(a.attempts[0].steps.size() == b.attempts[0].steps.size());
    for (std::size_t i = 0; i < a.attempts[0].steps.size(); ++i) {
      CHECK(a.attempts[0].steps[i].state.goals_text ==
            b.attempts[0].steps[i].state.goals_text);
      CHECK(a.attempts[0].steps[i].tactic.text == b.attempts[0].steps[i].tactic.text);
    }
  }
}

TEST_CASE("budget soundness and replay validity under random mocks") {
  std::mt19937_64 rng(99);
  ToyProverEnv env(ab_rules());
  for (int trial = 0; trial < 100; ++trial) {
    double p = 0.05 + 0.9 * (rng() % 100) / 100.0;
    ScriptedGenerator gen({{"r1", p}, {"r2", 1.0 - p}});
    int n = 1 + static_cast<int>(rng() % 12);
    std::string state = random_ab_string(rng, 2 + static_cast<int>(rng() % 8));
    auto res = sampling_search(Theorem{"t", state, {}}, env, gen, budget(n, 2, 1, 1.0), {},
                               rng());
    for (const auto& att : res.attempts) CHECK(att.generator_calls <= n);
    for (const auto& proof : res.proofs) {
      std::vector<Tactic> steps;
      for (const auto& s : proof.steps) steps.push_back(s.tactic);
      CHECK(env.replay(Theorem{"t", state, {}}, steps));
    }
  }
}

TEST_CASE("max_proofs_per_problem caps retained proofs") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r1", 0.9}, {"r2", 0.1}});
  SearchBudget b = budget(10, 8, 1, 0.0);
  b.max_proofs_per_problem = 3;
  auto res = sampling_search(Theorem{"t", "ab", {}}, env, gen, b);
  CHECK(res.solved);
  CHECK(res.proofs.size() == 3);  // solved 8 times, 3 retained
  CHECK(res.attempts.size() == 8);
}

TEST_CASE("pass_at_k") {
  auto solved_result = [](bool s, int k) {
    SearchResult r;
    r.solved = s;
    r.k_used = k;
    return r;
  };
  CHECK(pass_at_k({solved_result(true, 4), solved_result(false, 4), solved_result(true, 4),
                   solved_result(false, 4)}) == doctest::Approx(0.5));
  CHECK(pass_at_k({solved_result(false, 4), solved_result(false, 4)}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(pass_at_k({solved_result(true, 4), solved_result(true, 8)}), MixedBudgets);
}

TEST_CASE("derive_seed separates attempts and theorems") {
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "b", 0));
  CHECK(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));
  CHECK(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
}

TEST_CASE("duplicate tactics within one expansion are applied once") {
  ToyProverEnv env(ab_rules());
  ScriptedGenerator gen({{"r1", 1.0}});
  BfsTrace trace;
  auto res = best_first_search(Theorem{"t", "abab", {}}, env, gen, budget(1, 1, 4), {}, 0,
                               &trace);
  CHECK_FALSE(res.solved);
  CHECK(res.generator_calls_total == 4);
  REQUIRE(trace.expansions.size() == 1);  // one expansion, four identical samples
}
