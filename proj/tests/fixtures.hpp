// Shared toy fixtures for the test suites.
#ifndef NTP_TESTS_FIXTURES_HPP
#define NTP_TESTS_FIXTURES_HPP

#include <algorithm>
#include <atomic>
#include <random>
#include <string>
#include <vector>

#include "ntp/annotate.hpp"
#include "ntp/core.hpp"
#include "ntp/prover.hpp"

namespace ntp_tests {

inline std::vector<ntp::RewriteRule> ab_rules() {
  return {{"r1", "ab", ""}, {"r2", "ba", ""}};
}

// Strings over {a,b}. Reducible to empty by ab/ba cancellation iff balanced:
// any nonempty balanced string contains an adjacent "ab" or "ba", and
// cancellation preserves balance. This gives tests an exact solvability
// oracle: count('a') == count('b').
inline std::string random_ab_string(std::mt19937_64& rng, int len) {
  std::string s;
  for (int i = 0; i < len; ++i) s.push_back(rng() % 2 ? 'a' : 'b');
  return s;
}

inline std::string random_balanced_string(std::mt19937_64& rng, int pairs) {
  std::string s(pairs, 'a');
  s.append(pairs, 'b');
  std::shuffle(s.begin(), s.end(), rng);
  return s;
}

inline bool ab_solvable(const std::string& s) {
  long diff = 0;
  for (char c : s) diff += c == 'a' ? 1 : -1;
  return diff == 0;
}

inline std::string well_formed_oracle_response(const std::string& tactic,
                                               const std::string& reasoning) {
  return "### PLANNING OF REASONING\n\nGiven the above goal and the given the target tactic `" +
         tactic +
         "`, I should produce a reasoning that only based on the goal, and conclude to the `" +
         tactic +
         "`, but not in the hindsight format.\n\n### REASONING\n\n" + reasoning +
         "\n\n### TACTIC\n\n```lean4\n" + tactic + "\n```\n";
}

// Oracle fixture that echoes back the ground-truth tactic parsed out of the
// prompt. Selected call indices can be made to emit garbage, echo a wrong
// tactic, or fail at the transport level.
class CannedOracle : public ntp::OracleClient {
 public:
  int garbage_every = 0;                  // every n-th call returns unparseable text
  int mismatch_every = 0;                 // every n-th call echoes a wrong tactic
  std::atomic<int> transport_failures{0}; // fail this many calls outright, then recover
  std::atomic<int> calls{0};

  std::string complete(const std::string&, const std::string& prompt, double) override {
    int call = ++calls;
    if (transport_failures.fetch_sub(1) > 0) {
      throw ntp::OracleTransportError("canned transport failure");
    }
    if (garbage_every > 0 && call % garbage_every == 0) return "just words, no sections";
    std::string tactic = tactic_from_prompt(prompt);
    if (mismatch_every > 0 && call % mismatch_every == 0) tactic = "wrong_tactic";
    return well_formed_oracle_response(tactic, "The goal reduces directly by this rewrite.");
  }

  static std::string tactic_from_prompt(const std::string& prompt) {
    const std::string anchor = "# Given Tactic:\n```lean4\n";
    auto pos = prompt.rfind(anchor);
    if (pos == std::string::npos) return {};
    auto start = pos + anchor.size();
    auto end = prompt.find("\n```", start);
    return prompt.substr(start, end - start);
  }
};

}  // namespace ntp_tests

#endif  // NTP_TESTS_FIXTURES_HPP
