#ifndef NTP_CORE_HPP
#define NTP_CORE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ntp {

using json = nlohmann::json;

// A problem to be proved. `metadata` typically carries {"source", "level"}.
struct Theorem {
  std::string id;
  std::string statement;
  std::map<std::string, std::string> metadata;
};

// One prover goal state. n_goals == 0 means the proof is finished; that is
// the only way "no goals" is detected (goals_text rendering varies by prover).
struct ProofState {
  std::string goals_text;
  std::int64_t state_id = 0;
  int n_goals = 0;
  std::uint64_t session_uid = 0;  // issuing session, for cross-session checks

  bool finished() const { return n_goals == 0; }
};

struct Tactic {
  std::string text;
};

struct Thought {
  std::string text;
};

// One step of a trajectory: the state seen, the (optional) thought, the
// tactic applied, and the mean per-token log-probability of the completion
// that produced it (absent for replayed or human steps).
struct ProofStep {
  ProofState state;
  std::optional<Thought> thought;
  Tactic tactic;
  std::optional<double> avg_logprob;
};

struct Trajectory {
  std::string theorem_id;
  std::vector<ProofStep> steps;
  bool success = false;
  std::int64_t generator_calls = 0;
  std::int64_t wall_ms = 0;
};

enum class Provenance { Sft, OracleAnnotated, StarIter };

struct TrainingExample {
  std::string state_text;
  std::optional<std::string> thought_text;
  std::string tactic_text;
  Provenance provenance = Provenance::Sft;
  int star_iteration = 0;  // meaningful only for StarIter

  bool operator==(const TrainingExample& o) const {
    return state_text == o.state_text && thought_text == o.thought_text &&
           tactic_text == o.tactic_text;
  }
};

// Resource contract for one search/sampling run over a problem.
//   N: generator budget per attempt (expansions in search, calls in sampling)
//   K: attempts per problem
//   S: tactics requested per expanded node (sampling fixes S = 1)
struct SearchBudget {
  int n_max = 50;
  int k_attempts = 32;
  int s_expansions = 1;
  double temperature = 0.7;
  std::int64_t per_problem_timeout_ms = 0;  // 0 = unlimited
  int max_proofs_per_problem = 1;
};

enum class SerializationFormat { Direct, ThoughtAugmented };

struct MissingThought : std::runtime_error {
  MissingThought() : std::runtime_error("thought-augmented format requires a thought") {}
};

// One JSON object per line, keys in fixed order: state, thought?, tactic.
// Byte-deterministic for identical inputs.
inline std::string serialize_example(const TrainingExample& ex, SerializationFormat format) {
  json j = json::object();
  j["state"] = ex.state_text;
  if (format == SerializationFormat::ThoughtAugmented) {
    if (!ex.thought_text) throw MissingThought();
    j["thought"] = *ex.thought_text;
  }
  j["tactic"] = ex.tactic_text;
  // nlohmann sorts keys; emit in our fixed order instead.
  std::string out = "{\"state\":" + json(ex.state_text).dump();
  if (format == SerializationFormat::ThoughtAugmented)
    out += ",\"thought\":" + json(*ex.thought_text).dump();
  out += ",\"tactic\":" + json(ex.tactic_text).dump() + "}";
  return out;
}

inline TrainingExample deserialize_example(const std::string& line) {
  json j = json::parse(line);
  TrainingExample ex;
  ex.state_text = j.at("state").get<std::string>();
  if (j.contains("thought")) ex.thought_text = j.at("thought").get<std::string>();
  ex.tactic_text = j.at("tactic").get<std::string>();
  return ex;
}

inline int trajectory_reward(const Trajectory& t) { return t.success ? 1 : 0; }

inline json trajectory_to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    json js;
    js["state"] = s.state.goals_text;
    js["state_id"] = s.state.state_id;
    js["n_goals"] = s.state.n_goals;
    if (s.thought) js["thought"] = s.thought->text;
    js["tactic"] = s.tactic.text;
    if (s.avg_logprob) js["avg_logprob"] = *s.avg_logprob;
    steps.push_back(std::move(js));
  }
  return json{{"theorem_id", t.theorem_id},
              {"steps", std::move(steps)},
              {"success", t.success},
              {"generator_calls", t.generator_calls},
              {"wall_ms", t.wall_ms}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.theorem_id = j.at("theorem_id").get<std::string>();
  for (const auto& js : j.at("steps")) {
    ProofStep s;
    s.state.goals_text = js.at("state").get<std::string>();
    s.state.state_id = js.value("state_id", std::int64_t{0});
    s.state.n_goals = js.value("n_goals", 1);
    if (js.contains("thought")) s.thought = Thought{js.at("thought").get<std::string>()};
    s.tactic.text = js.at("tactic").get<std::string>();
    if (js.contains("avg_logprob")) s.avg_logprob = js.at("avg_logprob").get<double>();
    t.steps.push_back(std::move(s));
  }
  t.success = j.at("success").get<bool>();
  t.generator_calls = j.value("generator_calls", std::int64_t{0});
  t.wall_ms = j.value("wall_ms", std::int64_t{0});
  return t;
}

}  // namespace ntp

#endif  // NTP_CORE_HPP
