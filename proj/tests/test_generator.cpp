#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "ntp/generator.hpp"

using namespace ntp;
using namespace ntp_tests;

TEST_CASE("parse_completion direct mode") {
  auto [thought, tactic] = parse_completion("norm_num", GenMode::Direct);
  CHECK_FALSE(thought.has_value());
  CHECK(tactic.text == "norm_num");
  CHECK_THROWS_AS(parse_completion("  \n ", GenMode::Direct), MalformedCompletion);
}

TEST_CASE("parse_completion thought mode") {
  auto [thought, tactic] =
      parse_completion("T.\n### Tactic\n```lean4\nnlinarith\n```", GenMode::ThoughtAugmented);
  REQUIRE(thought.has_value());
  CHECK(thought->text == "T.");
  CHECK(tactic.text == "nlinarith");

  auto [t2, a2] = parse_completion(
      "The goal reduces by cancelling the leftmost pair.\n### Tactic\n```\nr1\n```",
      GenMode::ThoughtAugmented);
  CHECK(t2->text == "The goal reduces by cancelling the leftmost pair.");
  CHECK(a2.text == "r1");

  CHECK_THROWS_AS(parse_completion("just words", GenMode::ThoughtAugmented), MalformedCompletion);
  CHECK_THROWS_AS(parse_completion("T.\n### Tactic\nno fence", GenMode::ThoughtAugmented),
                  MalformedCompletion);
}

TEST_CASE("parse ∘ render is identity on conforming pairs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Thought th{"thought " + std::to_string(rng() % 1000) + " about the goal"};
    Tactic ta{"tac_" + std::to_string(rng() % 1000)};
    auto [th2, ta2] = parse_completion(render_completion(th, ta, GenMode::ThoughtAugmented),
                                       GenMode::ThoughtAugmented);
    CHECK(th2->text == th.text);
    CHECK(ta2.text == ta.text);
    auto [th3, ta3] =
        parse_completion(render_completion(std::nullopt, ta, GenMode::Direct), GenMode::Direct);
    CHECK_FALSE(th3.has_value());
    CHECK(ta3.text == ta.text);
  }
}

TEST_CASE("scripted mock: argmax at T=0 with its own log-prob") {
  ScriptedGenerator gen({{"r1", 0.8}, {"r2", 0.2}});
  std::mt19937_64 rng(1);
  GenRequest req;
  req.state_text = "aabb";
  req.n = 1;
  req.temperature = 0.0;
  auto samples = gen.generate(req, rng);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].tactic.text == "r1");
  CHECK(samples[0].avg_logprob == doctest::Approx(std::log(0.8)).epsilon(1e-9));
}

TEST_CASE("temperature monotonicity: low T concentrates on the argmax") {
  ScriptedGenerator gen({{"r1", 0.6}, {"r2", 0.4}});
  auto argmax_fraction = [&gen](double temp) {
    std::mt19937_64 rng(9);
    GenRequest req;
    req.n = 1;
    req.temperature = temp;
    int hits = 0;
    for (int i = 0; i < 2000; ++i)
      if (gen.generate(req, rng)[0].tactic.text == "r1") ++hits;
    return hits / 2000.0;
  };
  double at_1 = argmax_fraction(1.0);
  double at_03 = argmax_fraction(0.3);
  double at_0 = argmax_fraction(0.0);
  CHECK(at_03 > at_1);
  CHECK(at_0 == 1.0);
}

TEST_CASE("count policy: add-one smoothing arithmetic") {
  std::vector<TrainingExample> ds;
  for (int i = 0; i < 3; ++i) ds.push_back({"aabb", std::nullopt, "r1", Provenance::Sft, 0});
  ds.push_back({"aabb", std::nullopt, "r2", Provenance::Sft, 0});
  CountPolicy policy(ds, ab_rules());
  CHECK(policy.probability("aabb", "r1") == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(policy.probability("aabb", "r2") == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("count policy: unseen state is uniform over rule names") {
  std::vector<TrainingExample> ds = {{"aabb", std::nullopt, "r1", Provenance::Sft, 0}};
  CountPolicy policy(ds, ab_rules());
  CHECK(policy.probability("bbbbbaaaaa", "r1") == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(policy.probability("bbbbbaaaaa", "r2") == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("count policy: probabilities sum to 1 per state key") {
  std::mt19937_64 rng(11);
  std::vector<TrainingExample> ds;
  for (int i = 0; i < 60; ++i)
    ds.push_back({random_ab_string(rng, 4 + static_cast<int>(rng() % 5)), std::nullopt,
                  rng() % 2 ? "r1" : "r2", Provenance::Sft, 0});
  CountPolicy policy(ds, ab_rules());
  for (int i = 0; i < 40; ++i) {
    std::string state = random_ab_string(rng, 3 + static_cast<int>(rng() % 6));
    double sum = policy.probability(state, "r1") + policy.probability(state, "r2");
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("count policy: sampled logprob matches ln of the tactic probability") {
  std::vector<TrainingExample> ds = {{"aabb", std::nullopt, "r1", Provenance::Sft, 0},
                                     {"aabb", std::nullopt, "r1", Provenance::Sft, 0}};
  CountPolicy policy(ds, ab_rules());
  std::mt19937_64 rng(5);
  GenRequest req;
  req.state_text = "aabb";
  req.n = 1;
  req.temperature = 1.0;
  for (int i = 0; i < 100; ++i) {
    auto s = policy.generate(req, rng)[0];
    CHECK(s.avg_logprob ==
          doctest::Approx(std::log(policy.probability("aabb", s.tactic.text))).epsilon(1e-9));
  }
}

TEST_CASE("fit_count_policy rejects an empty dataset") {
  CHECK_THROWS_AS(CountPolicy({}, ab_rules()), EmptyDataset);
}

TEST_CASE("policy prompt template") {
  CHECK(render_policy_prompt("⊢ True", GenMode::Direct) == "### State\n⊢ True\n");
  CHECK(render_policy_prompt("⊢ True", GenMode::ThoughtAugmented) ==
        "### State\n⊢ True\n### Reasoning\n");
}
