#ifndef NTP_GENERATOR_HPP
#define NTP_GENERATOR_HPP

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ntp/core.hpp"
#include "ntp/prover.hpp"

namespace ntp {

struct BackendUnavailable : std::runtime_error {
  explicit BackendUnavailable(const std::string& msg) : std::runtime_error(msg) {}
};
struct MalformedCompletion : std::runtime_error {
  explicit MalformedCompletion(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyDataset : std::runtime_error {
  EmptyDataset() : std::runtime_error("cannot fit a policy on an empty dataset") {}
};

enum class GenMode { Direct, ThoughtAugmented };
enum class DecodeMode { Sample, Beam };

struct GenRequest {
  std::string state_text;
  GenMode mode = GenMode::Direct;
  int n = 1;
  double temperature = 0.7;
  int max_tokens = 512;
  DecodeMode decode = DecodeMode::Sample;
};

// One generator completion. A sample that failed the completion grammar
// carries `error` and an empty tactic; callers treat it like an illegal
// tactic (it still consumed one generation).
struct GenSample {
  std::string raw_text;
  std::optional<Thought> thought;
  Tactic tactic;
  double avg_logprob = 0.0;
  std::optional<std::string> error;
};

// Default completion grammar. The section marker is configurable because
// serving stacks disagree on the exact heading.
inline constexpr const char* kDefaultTacticMarker = "### Tactic";

// Prompt the policy sees for a state. Thought mode opens the reasoning
// section so the model continues with thought text.
inline std::string render_policy_prompt(const std::string& state_text, GenMode mode) {
  std::string p = "### State\n" + state_text + "\n";
  if (mode == GenMode::ThoughtAugmented) p += "### Reasoning\n";
  return p;
}

namespace detail {

inline std::string trim_copy(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Content of the first ``` fenced block at or after `from`; the language tag
// on the opening fence is ignored.
inline std::optional<std::string> first_fenced_block(const std::string& text, std::size_t from) {
  auto open = text.find("```", from);
  if (open == std::string::npos) return std::nullopt;
  auto nl = text.find('\n', open);
  if (nl == std::string::npos) return std::nullopt;  // tag line never ends
  auto close = text.find("```", nl + 1);
  if (close == std::string::npos) return std::nullopt;
  return text.substr(nl + 1, close - nl - 1);
}

}  // namespace detail

// Splits a raw completion into (thought, tactic).
//  direct:            the first nonempty line is the tactic.
//  thought_augmented: text before the marker is the thought; the tactic is
//                     the first fenced block after the marker.
inline std::pair<std::optional<Thought>, Tactic> parse_completion(
    const std::string& raw, GenMode mode,
    const std::string& marker = kDefaultTacticMarker) {
  if (mode == GenMode::Direct) {
    std::string t = detail::trim_copy(raw);
    auto nl = t.find('\n');
    if (nl != std::string::npos) t = detail::trim_copy(t.substr(0, nl));
    if (t.empty()) throw MalformedCompletion("empty tactic");
    return {std::nullopt, Tactic{t}};
  }
  auto pos = raw.find(marker);
  if (pos == std::string::npos) throw MalformedCompletion("no `" + marker + "` marker");
  std::string thought = detail::trim_copy(raw.substr(0, pos));
  if (thought.empty()) throw MalformedCompletion("empty thought");
  auto block = detail::first_fenced_block(raw, pos + marker.size());
  if (!block) throw MalformedCompletion("no fenced tactic block");
  std::string tactic = detail::trim_copy(*block);
  if (tactic.empty()) throw MalformedCompletion("empty tactic");
  return {Thought{thought}, Tactic{tactic}};
}

// Inverse writer of parse_completion for grammar-conforming pairs; used by
// fixtures and the scripted backends.
inline std::string render_completion(const std::optional<Thought>& thought, const Tactic& tactic,
                                     GenMode mode,
                                     const std::string& marker = kDefaultTacticMarker) {
  if (mode == GenMode::Direct) return tactic.text;
  return thought->text + "\n" + marker + "\n```\n" + tactic.text + "\n```";
}

// The policy contract. Implementations must be safe for concurrent calls;
// `rng` supplies the caller's deterministic randomness stream.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<GenSample> generate(const GenRequest& req, std::mt19937_64& rng) = 0;
};

namespace detail {

// Temperature-shaped draw from a discrete distribution. T = 0 is argmax
// (first maximum wins); avg_logprob reports the base probability.
inline std::size_t draw_index(const std::vector<double>& probs, double temperature,
                              std::mt19937_64& rng) {
  if (temperature <= 0.0) {
    return static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
  std::vector<double> w(probs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    w[i] = std::pow(probs[i], 1.0 / temperature);
    z += w[i];
  }
  std::uniform_real_distribution<double> u(0.0, z);
  double x = u(rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (x < w[i]) return i;
    x -= w[i];
  }
  return w.size() - 1;
}

}  // namespace detail

// A mock backend with a fixed tactic distribution, for tests and desk runs.
// Emits grammar-conforming completions; thought mode attaches a stock
// rationale line so parsing round-trips.
class ScriptedGenerator : public Generator {
 public:
  // Entries need not be normalized; insertion order breaks argmax ties.
  explicit ScriptedGenerator(std::vector<std::pair<std::string, double>> table)
      : table_(std::move(table)) {
    double z = 0.0;
    for (const auto& [_, p] : table_) z += p;
    if (z <= 0.0) throw std::invalid_argument("scripted table has no mass");
    for (auto& [_, p] : table_) p /= z;
  }

  std::vector<GenSample> generate(const GenRequest& req, std::mt19937_64& rng) override {
    std::vector<double> probs;
    probs.reserve(table_.size());
    for (const auto& [_, p] : table_) probs.push_back(p);
    std::vector<GenSample> out;
    for (int i = 0; i < req.n; ++i) {
      std::size_t k = detail::draw_index(probs, req.decode == DecodeMode::Beam ? 0.0 : req.temperature, rng);
      GenSample s;
      s.tactic = Tactic{table_[k].first};
      s.avg_logprob = std::log(table_[k].second);
      if (req.mode == GenMode::ThoughtAugmented)
        s.thought = Thought{"The goal suggests applying " + table_[k].first + " next."};
      s.raw_text = render_completion(s.thought, s.tactic, req.mode);
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, double>> table_;
};

// Add-one-smoothed tactic frequencies conditioned on a state feature key.
// The feature key of a toy state is the multiset of rule-lhs occurrence
// counts in the state string; the tactic universe is the rule-name set.
// Stands in for a fine-tuned model so the expert-iteration loop is fully
// executable in-process.
class CountPolicy : public Generator {
 public:
  CountPolicy(const std::vector<TrainingExample>& dataset, std::vector<RewriteRule> rules)
      : rules_(std::move(rules)) {
    if (dataset.empty()) throw EmptyDataset();
    for (const auto& ex : dataset) {
      auto& row = counts_[feature_key(ex.state_text)];
      row[ex.tactic_text] += 1;
    }
  }

  std::string feature_key(const std::string& state) const {
    std::string key;
    for (const auto& r : rules_) {
      int c = 0;
      for (std::size_t pos = 0; (pos = state.find(r.lhs, pos)) != std::string::npos; ++pos) ++c;
      key += r.lhs + "=" + std::to_string(c) + ";";
    }
    return key;
  }

  // p(tactic | key) = (count + 1) / (total + |rules|); unseen keys are uniform.
  double probability(const std::string& state, const std::string& tactic) const {
    auto it = counts_.find(feature_key(state));
    const double r = static_cast<double>(rules_.size());
    if (it == counts_.end()) return 1.0 / r;
    double total = 0.0;
    for (const auto& [_, c] : it->second) total += c;
    auto jt = it->second.find(tactic);
    double c = jt == it->second.end() ? 0.0 : static_cast<double>(jt->second);
    return (c + 1.0) / (total + r);
  }

  std::vector<GenSample> generate(const GenRequest& req, std::mt19937_64& rng) override {
    std::vector<double> probs;
    probs.reserve(rules_.size());
    for (const auto& r : rules_) probs.push_back(probability(req.state_text, r.name));
    std::vector<GenSample> out;
    for (int i = 0; i < req.n; ++i) {
      std::size_t k = detail::draw_index(probs, req.decode == DecodeMode::Beam ? 0.0 : req.temperature, rng);
      GenSample s;
      s.tactic = Tactic{rules_[k].name};
      s.avg_logprob = std::log(probs[k]);
      if (req.mode == GenMode::ThoughtAugmented)
        s.thought = Thought{"Rewrite with " + rules_[k].name + "."};
      s.raw_text = render_completion(s.thought, s.tactic, req.mode);
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  std::vector<RewriteRule> rules_;
  std::map<std::string, std::map<std::string, int>> counts_;
};

inline std::shared_ptr<CountPolicy> fit_count_policy(const std::vector<TrainingExample>& dataset,
                                                     std::vector<RewriteRule> rules) {
  return std::make_shared<CountPolicy>(dataset, std::move(rules));
}

}  // namespace ntp

#endif  // NTP_GENERATOR_HPP
