#ifndef NTP_PROVER_HPP
#define NTP_PROVER_HPP

#include <atomic>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ntp/core.hpp"

namespace ntp {

struct EnvUnavailable : std::runtime_error {
  explicit EnvUnavailable(const std::string& msg) : std::runtime_error(msg) {}
};
struct BadTheorem : std::runtime_error {
  explicit BadTheorem(const std::string& msg) : std::runtime_error(msg) {}
};

// Result of applying one tactic. Prover-level failures are values, never
// exceptions; only transport failure raises EnvUnavailable.
struct TacticOutcome {
  enum class Kind { NewState, ProofFinished, TacticError, Timeout };
  Kind kind = Kind::TacticError;
  ProofState state;     // NewState only
  std::string message;  // TacticError only

  static TacticOutcome new_state(ProofState s) {
    return {Kind::NewState, std::move(s), {}};
  }
  static TacticOutcome finished() { return {Kind::ProofFinished, {}, {}}; }
  static TacticOutcome error(std::string msg) {
    return {Kind::TacticError, {}, std::move(msg)};
  }
  static TacticOutcome timeout() { return {Kind::Timeout, {}, {}}; }
};

// One exclusive interaction session with a prover. The MDP transition
// function: init yields the root state, apply_tactic steps it.
class ProverSession {
 public:
  virtual ~ProverSession() = default;
  virtual ProofState init_theorem(const Theorem& theorem) = 0;
  virtual TacticOutcome apply_tactic(const ProofState& state, const Tactic& tactic,
                                     std::int64_t timeout_ms) = 0;
};

class ProverEnv {
 public:
  virtual ~ProverEnv() = default;
  virtual std::unique_ptr<ProverSession> open_session() = 0;

  // True iff the steps applied in order from the initial state reach
  // ProofFinished exactly at the last step with no error or timeout.
  bool replay(const Theorem& theorem, const std::vector<Tactic>& steps) {
    auto session = open_session();
    ProofState state = session->init_theorem(theorem);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      TacticOutcome out = session->apply_tactic(state, steps[i], 0);
      switch (out.kind) {
        case TacticOutcome::Kind::NewState:
          if (i + 1 == steps.size()) return false;  // goals remain
          state = out.state;
          break;
        case TacticOutcome::Kind::ProofFinished:
          return i + 1 == steps.size();
        default:
          return false;
      }
    }
    return false;  // empty or exhausted without finishing
  }
};

// ---------------------------------------------------------------------------
// Toy rewriting prover.
//
// A state is a string, a tactic is a rule name, applying a rule rewrites the
// leftmost occurrence of its lhs, and the proof is finished when the string
// is empty. Deterministic by construction.

struct RewriteRule {
  std::string name;
  std::string lhs;  // nonempty
  std::string rhs;
};

struct RuleParseError : std::runtime_error {
  explicit RuleParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Rule file format: one `name: lhs -> rhs` per line, `#` comments allowed.
// rhs may be empty.
inline std::vector<RewriteRule> parse_rule_text(const std::string& text) {
  std::vector<RewriteRule> rules;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto colon = line.find(':');
    auto arrow = line.find("->");
    if (colon == std::string::npos || arrow == std::string::npos || arrow < colon)
      throw RuleParseError("line " + std::to_string(lineno) + ": expected `name: lhs -> rhs`");
    RewriteRule r;
    r.name = trim(line.substr(0, colon));
    r.lhs = trim(line.substr(colon + 1, arrow - colon - 1));
    r.rhs = trim(line.substr(arrow + 2));
    if (r.name.empty()) throw RuleParseError("line " + std::to_string(lineno) + ": empty rule name");
    if (r.lhs.empty()) throw RuleParseError("line " + std::to_string(lineno) + ": empty lhs");
    for (const auto& prev : rules)
      if (prev.name == r.name)
        throw RuleParseError("line " + std::to_string(lineno) + ": duplicate rule name " + r.name);
    rules.push_back(std::move(r));
  }
  return rules;
}

inline std::vector<RewriteRule> load_rule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuleParseError("cannot open rule file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rule_text(ss.str());
}

namespace detail {
inline std::atomic<std::uint64_t> g_session_counter{1};
}

class ToyProverSession : public ProverSession {
 public:
  explicit ToyProverSession(std::vector<RewriteRule> rules)
      : rules_(std::move(rules)), uid_(detail::g_session_counter.fetch_add(1)) {}

  ProofState init_theorem(const Theorem& theorem) override {
    if (theorem.statement.empty()) throw BadTheorem("empty goal string is not a valid problem");
    states_.clear();
    next_id_ = 0;
    return fresh_state(theorem.statement);
  }

  TacticOutcome apply_tactic(const ProofState& state, const Tactic& tactic,
                             std::int64_t /*timeout_ms*/) override {
    if (state.session_uid != uid_) throw EnvUnavailable("state does not belong to this session");
    auto it = states_.find(state.state_id);
    if (it == states_.end()) throw EnvUnavailable("unknown state id");
    const RewriteRule* rule = nullptr;
    for (const auto& r : rules_)
      if (r.name == tactic.text) { rule = &r; break; }
    if (!rule) return TacticOutcome::error("unknown rule");
    const std::string& goal = it->second;
    auto pos = goal.find(rule->lhs);
    if (pos == std::string::npos) return TacticOutcome::error("rule not applicable");
    std::string next = goal.substr(0, pos) + rule->rhs + goal.substr(pos + rule->lhs.size());
    if (next.empty()) return TacticOutcome::finished();
    return TacticOutcome::new_state(fresh_state(next));
  }

  const std::vector<RewriteRule>& rules() const { return rules_; }

 private:
  ProofState fresh_state(std::string goal) {
    ProofState s;
    s.state_id = next_id_++;
    s.goals_text = goal;
    s.n_goals = 1;
    s.session_uid = uid_;
    states_[s.state_id] = std::move(goal);
    return s;
  }

  std::vector<RewriteRule> rules_;
  std::unordered_map<std::int64_t, std::string> states_;
  std::int64_t next_id_ = 0;
  std::uint64_t uid_;
};

class ToyProverEnv : public ProverEnv {
 public:
  explicit ToyProverEnv(std::vector<RewriteRule> rules) : rules_(std::move(rules)) {}

  std::unique_ptr<ProverSession> open_session() override {
    return std::make_unique<ToyProverSession>(rules_);
  }

  const std::vector<RewriteRule>& rules() const { return rules_; }

 private:
  std::vector<RewriteRule> rules_;
};

}  // namespace ntp

#endif  // NTP_PROVER_HPP
