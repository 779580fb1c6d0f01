#ifndef NTP_ANNOTATE_HPP
#define NTP_ANNOTATE_HPP

#include <chrono>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ntp/core.hpp"
#include "ntp/generator.hpp"

namespace ntp {

struct MissingSection : std::runtime_error {
  explicit MissingSection(const std::string& name)
      : std::runtime_error("missing section: " + name), section(name) {}
  std::string section;
};
struct NoTacticBlock : std::runtime_error {
  NoTacticBlock() : std::runtime_error("no fenced block under the tactic section") {}
};
struct TacticMismatch : std::runtime_error {
  TacticMismatch(const std::string& expected, const std::string& got)
      : std::runtime_error("oracle echoed `" + got + "`, expected `" + expected + "`") {}
};
struct LedgerCorrupt : std::runtime_error {
  explicit LedgerCorrupt(const std::string& msg) : std::runtime_error(msg) {}
};
struct OracleTransportError : std::runtime_error {
  explicit OracleTransportError(const std::string& msg) : std::runtime_error(msg) {}
};

using StateTacticPair = std::pair<std::string, std::string>;

// Drops every pair whose tactic contains a newline; multi-line tactics do
// not fit the one-step completion grammar. Order-preserving and idempotent.
inline std::vector<StateTacticPair> filter_pairs(const std::vector<StateTacticPair>& pairs) {
  std::vector<StateTacticPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    if (p.second.find('\n') == std::string::npos) out.push_back(p);
  return out;
}

// The few-shot oracle prompt. Stored verbatim as an immutable resource; the
// two `{theorem[...]}` placeholders are the only substitution points.
inline const std::string& annotation_prompt_template() {
  static const std::string tmpl = R"NTPPROMPT(Please act as a professional mathematician.
Your goal is to accurately prove a math theorem in Lean4.
You are given the first tactic that should be taken to prove the Given Theorem.

# Example:

Given Theorem:
```lean4
X : Type u_1
Y : Type u_2
inst✝¹ : TopologicalSpace X
inst✝ : TopologicalSpace Y
f : X →. Y
h : PContinuous f
⊢ IsOpen (PFun.preimage f Set.univ)
```
Given Tactic:
```lean4
exact h _ isOpen_univ
```
Assistant Output:
### PLANNING OF REASONING
Given the above goal and the given the target tactic `exact h _ isOpen_univ`, I should produce a reasoning that only based on the goal, and conclude to the `exact h _ isOpen_univ`, but not in the hindsight format.

### REASONING

By directly using the hypothesis `h : PContinuous f`, we state that for any open set, its preimage via `f` is also open, and this applies to `Set.univ` as well.

### TACTIC

```lean4
exact h _ isOpen_univ
```

To achieve the goal, you have three jobs.
# Write down the planning of reasoning.
# Write down the reasoning that can result in the selection of the Given Tactic.
# Write down the Given Tactic.
You have four principles to do this.
# Craft reasoning that is comprehensive yet concise, contained ideally within two sentences.
# Begin reasoning with the objective of the Given Theorem, ensuring logical progression, rather than constructing it retrospectively from the Given Tactic.
# Avoid mentioning the Given Tactic and specific statement names from the Given Tactic throughout your reasoning.
# Position the conclusion of the tactic after presenting all reasons, ensuring that details regarding the Given Tactic are not introduced at the start of your reasoning.
Your output should be strictly in the following format and should not contain extra content:

### PLANNING OF REASONING

Given the above goal and the given the target tactic <Given Tactic>, I should produce a reasoning that only based on the goal, and conclude to the exact <Given Tactic>, but not in the hindsight format.

### REASONING

<your reasoning to the Given Tactic>

### TACTIC

<Given Tactic>

# Given Theorem:
```lean4
{theorem["state_before"]}
```

# Given Tactic:
```lean4
{theorem["tactic"]}
```
)NTPPROMPT";
  return tmpl;
}

// Substitutes state and tactic into the template. Plain single-pass
// replacement: braces in the state survive verbatim.
inline std::string build_annotation_prompt(const std::string& state, const std::string& tactic) {
  std::string out = annotation_prompt_template();
  auto replace_once = [&out](const std::string& key, const std::string& value) {
    auto pos = out.find(key);
    if (pos == std::string::npos)
      throw std::runtime_error("prompt template lost placeholder " + key);
    out.replace(pos, key.size(), value);
  };
  replace_once("{theorem[\"state_before\"]}", state);
  replace_once("{theorem[\"tactic\"]}", tactic);
  return out;
}

struct OracleResponseSections {
  std::string planning;
  std::string reasoning;
  std::string tactic_block;
};

// Splits an oracle response on its three required headers and pulls the
// first fenced block under the tactic header. Trailing prose after the
// block is ignored.
inline OracleResponseSections parse_oracle_response(const std::string& text) {
  const std::string h_planning = "### PLANNING OF REASONING";
  const std::string h_reasoning = "### REASONING";
  const std::string h_tactic = "### TACTIC";

  auto p0 = text.find(h_planning);
  if (p0 == std::string::npos) throw MissingSection("PLANNING OF REASONING");
  auto p1 = text.find(h_reasoning, p0 + h_planning.size());
  if (p1 == std::string::npos) throw MissingSection("REASONING");
  auto p2 = text.find(h_tactic, p1 + h_reasoning.size());
  if (p2 == std::string::npos) throw MissingSection("TACTIC");

  OracleResponseSections s;
  s.planning = detail::trim_copy(text.substr(p0 + h_planning.size(), p1 - p0 - h_planning.size()));
  s.reasoning = detail::trim_copy(text.substr(p1 + h_reasoning.size(), p2 - p1 - h_reasoning.size()));
  auto block = detail::first_fenced_block(text, p2 + h_tactic.size());
  if (!block) throw NoTacticBlock();
  s.tactic_block = detail::trim_copy(*block);
  if (s.planning.empty()) throw MissingSection("PLANNING OF REASONING");
  if (s.reasoning.empty()) throw MissingSection("REASONING");
  if (s.tactic_block.empty()) throw NoTacticBlock();
  return s;
}

// Trim plus collapse of internal whitespace runs to single spaces.
inline std::string normalize_tactic(const std::string& s) {
  std::string out;
  bool in_ws = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in_ws = !out.empty();
    } else {
      if (in_ws) out.push_back(' ');
      in_ws = false;
      out.push_back(c);
    }
  }
  return out;
}

// Accepts iff the oracle echoed the ground-truth tactic (modulo whitespace
// normalization). The stored tactic is always the ground truth, never the
// oracle's echo.
inline TrainingExample validate_and_emit(const StateTacticPair& pair,
                                         const OracleResponseSections& sections) {
  if (normalize_tactic(sections.tactic_block) != normalize_tactic(pair.second))
    throw TacticMismatch(pair.second, sections.tactic_block);
  TrainingExample ex;
  ex.state_text = pair.first;
  ex.thought_text = sections.reasoning;
  ex.tactic_text = pair.second;
  ex.provenance = Provenance::OracleAnnotated;
  return ex;
}

// Chat-completion transport. Provider specifics (endpoint, auth) live in
// the implementation; failures raise OracleTransportError.
class OracleClient {
 public:
  virtual ~OracleClient() = default;
  virtual std::string complete(const std::string& system_msg, const std::string& user_msg,
                               double temperature) = 0;
};

struct RetryPolicy {
  int transport_retries = 3;
  int parse_regenerations = 1;
  std::int64_t backoff_initial_ms = 200;
  double failure_rate_ceiling = 1.0;  // abort when exceeded
};

struct AnnotationFailureCeiling : std::runtime_error {
  AnnotationFailureCeiling() : std::runtime_error("annotation failure rate exceeded the ceiling") {}
};

struct AnnotationReport {
  std::int64_t input = 0;
  std::int64_t filtered = 0;
  std::int64_t accepted = 0;
  std::int64_t mismatched = 0;
  std::int64_t parse_failed = 0;
  std::int64_t transport_failed = 0;
  std::int64_t skipped_ledger = 0;  // completed in a previous run
};

inline std::uint64_t pair_hash(const StateTacticPair& p) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (unsigned char c : p.first) mix(c);
  mix(0x1f);
  for (unsigned char c : p.second) mix(c);
  return h;
}

// Append-only completion ledger keyed by pair hash; a rerun performs no
// oracle call for a pair whose terminal status is already recorded.
class AnnotationLedger {
 public:
  explicit AnnotationLedger(std::string path) : path_(std::move(path)) {
    if (path_.empty()) return;
    std::ifstream in(path_);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
        std::string status = j.at("status").get<std::string>();
        std::uint64_t h = j.at("pair_hash").get<std::uint64_t>();
        if (status != "transport_failed") done_.insert(h);
      } catch (const std::exception& e) {
        throw LedgerCorrupt("ledger line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  bool completed(std::uint64_t hash) const { return done_.count(hash) > 0; }

  void record(std::uint64_t hash, const std::string& status) {
    std::lock_guard<std::mutex> lock(mu_);
    if (status != "transport_failed") done_.insert(hash);
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    out << json{{"pair_hash", hash}, {"status", status}, {"timestamp", now}}.dump() << "\n";
  }

 private:
  std::string path_;
  std::mutex mu_;
  std::unordered_set<std::uint64_t> done_;
};

inline constexpr const char* kOracleSystemMessage =
    "You are a careful assistant that follows output format instructions exactly.";

// filter -> prompt -> oracle -> parse -> validate, with bounded concurrency
// and a resumable ledger. Output order follows input order regardless of
// completion order.
inline std::pair<std::vector<TrainingExample>, AnnotationReport> annotate_corpus(
    const std::vector<StateTacticPair>& pairs, OracleClient& oracle, int concurrency = 4,
    const RetryPolicy& retry = {}, AnnotationLedger* ledger = nullptr,
    double oracle_temperature = 0.7) {
  AnnotationReport report;
  report.input = static_cast<std::int64_t>(pairs.size());
  auto kept = filter_pairs(pairs);
  report.filtered = report.input - static_cast<std::int64_t>(kept.size());

  enum class Status { Accepted, Mismatched, ParseFailed, TransportFailed, Skipped };
  std::vector<Status> statuses(kept.size(), Status::TransportFailed);
  std::vector<std::optional<TrainingExample>> results(kept.size());

  std::mutex next_mu;
  std::size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(next_mu);
        if (next >= kept.size()) return;
        i = next++;
      }
      const auto& pair = kept[i];
      std::uint64_t h = pair_hash(pair);
      if (ledger && ledger->completed(h)) {
        statuses[i] = Status::Skipped;
        continue;
      }
      std::string prompt = build_annotation_prompt(pair.first, pair.second);

      int parse_attempts = 1 + retry.parse_regenerations;
      Status st = Status::TransportFailed;
      while (parse_attempts-- > 0) {
        std::string response;
        bool got_response = false;
        std::int64_t backoff = retry.backoff_initial_ms;
        for (int t = 0; t <= retry.transport_retries; ++t) {
          try {
            response = oracle.complete(kOracleSystemMessage, prompt, oracle_temperature);
            got_response = true;
            break;
          } catch (const OracleTransportError&) {
            if (t < retry.transport_retries) {
              std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
              backoff *= 2;
            }
          }
        }
        if (!got_response) {
          st = Status::TransportFailed;
          break;
        }
        try {
          auto sections = parse_oracle_response(response);
          try {
            results[i] = validate_and_emit(pair, sections);
            st = Status::Accepted;
          } catch (const TacticMismatch&) {
            st = Status::Mismatched;
          }
          break;
        } catch (const std::exception&) {
          st = Status::ParseFailed;  // regenerate if budget remains
        }
      }
      statuses[i] = st;
      if (ledger) {
        const char* name = st == Status::Accepted      ? "accepted"
                           : st == Status::Mismatched  ? "mismatched"
                           : st == Status::ParseFailed ? "parse_failed"
                                                       : "transport_failed";
        ledger->record(h, name);
      }
    }
  };

  std::vector<std::thread> threads;
  for (int i = 0; i < std::max(1, concurrency); ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::vector<TrainingExample> dataset;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    switch (statuses[i]) {
      case Status::Accepted:
        ++report.accepted;
        dataset.push_back(std::move(*results[i]));
        break;
      case Status::Mismatched: ++report.mismatched; break;
      case Status::ParseFailed: ++report.parse_failed; break;
      case Status::TransportFailed: ++report.transport_failed; break;
      case Status::Skipped: ++report.skipped_ledger; break;
    }
  }
  std::int64_t attempted = static_cast<std::int64_t>(kept.size()) - report.skipped_ledger;
  std::int64_t failures = report.parse_failed + report.transport_failed;
  if (attempted > 0 &&
      static_cast<double>(failures) / static_cast<double>(attempted) > retry.failure_rate_ceiling)
    throw AnnotationFailureCeiling();
  return {std::move(dataset), report};
}

}  // namespace ntp

#endif  // NTP_ANNOTATE_HPP
