#ifndef NTP_CONFIG_HPP
#define NTP_CONFIG_HPP

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ntp/core.hpp"

namespace ntp {

struct SchemaViolation : std::runtime_error {
  explicit SchemaViolation(const std::string& path, const std::string& why)
      : std::runtime_error("config error at " + path + ": " + why) {}
};

struct GeneratorConfig {
  std::string backend = "scripted";  // scripted | count | http
  std::string url = "http://127.0.0.1:8000";
  int max_in_flight = 8;
  std::string mode = "direct";  // direct | thought
  std::string tactic_marker = "### Tactic";
  std::map<std::string, double> table;  // scripted backend distribution
  std::string seed_dataset;             // count backend: dataset to fit on
};

struct OracleConfig {
  std::string url = "http://127.0.0.1:8001";
  double temperature = 0.7;
  int concurrency = 4;
  int transport_retries = 3;
  int parse_regenerations = 1;
  double failure_rate_ceiling = 1.0;
};

struct ProverConfig {
  std::string kind = "toy";  // toy | bridge
  std::string rules;         // rule file for the toy prover
  std::vector<std::string> bridge_cmd;
};

struct SearchConfig {
  std::string priority = "standard";  // standard | literal
  int workers = 1;
  bool dedup_states = false;
  // avg_logprob averaging scope is whole-completion; exposed for audit only.
  std::string logprob_scope = "completion";
};

struct StarConfig {
  int n_max = 5;
  int k_attempts = 32;
  double temperature = 1.0;
  std::int64_t timeout_ms = 60000;
  int max_proofs = 3;
  int iterations = 2;
  std::string dataset_mode = "joint";  // joint | continue
  std::string trainer_cmd;             // empty = in-repo count-policy trainer
  std::string thought_dataset;         // D_T path, required for joint mode
};

struct EvalConfig {
  int n_max = 50;
  int k_attempts = 32;
  int s_expansions = 1;
  double temperature = 0.7;
  std::int64_t timeout_ms = 0;
  int max_proofs = 1;
};

struct Config {
  GeneratorConfig generator;
  OracleConfig oracle;
  ProverConfig prover;
  SearchConfig search;
  StarConfig star;
  EvalConfig eval;
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed,
                           const std::string& path) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw SchemaViolation(path + "." + key, "unknown key");
}

template <typename T>
inline void read_field(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaViolation(path + "." + key, "wrong type");
  }
}

inline void check_enum(const std::string& value, const std::set<std::string>& allowed,
                       const std::string& path) {
  if (!allowed.count(value)) throw SchemaViolation(path, "must be one of a fixed set, got `" + value + "`");
}

}  // namespace detail

// Merges a JSON document over the built-in defaults. Unknown keys and type
// mismatches are rejected with the offending path.
inline Config config_from_json(const json& j) {
  Config c;
  detail::reject_unknown(j, {"generator", "oracle", "prover", "search", "star", "eval"}, "$");

  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    detail::reject_unknown(
        g, {"backend", "url", "max_in_flight", "mode", "tactic_marker", "table", "seed_dataset"},
        "generator");
    detail::read_field(g, "backend", c.generator.backend, "generator");
    detail::read_field(g, "url", c.generator.url, "generator");
    detail::read_field(g, "max_in_flight", c.generator.max_in_flight, "generator");
    detail::read_field(g, "mode", c.generator.mode, "generator");
    detail::read_field(g, "tactic_marker", c.generator.tactic_marker, "generator");
    detail::read_field(g, "table", c.generator.table, "generator");
    detail::read_field(g, "seed_dataset", c.generator.seed_dataset, "generator");
    detail::check_enum(c.generator.backend, {"scripted", "count", "http"}, "generator.backend");
    detail::check_enum(c.generator.mode, {"direct", "thought"}, "generator.mode");
  }
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    detail::reject_unknown(o,
                           {"url", "temperature", "concurrency", "transport_retries",
                            "parse_regenerations", "failure_rate_ceiling"},
                           "oracle");
    detail::read_field(o, "url", c.oracle.url, "oracle");
    detail::read_field(o, "temperature", c.oracle.temperature, "oracle");
    detail::read_field(o, "concurrency", c.oracle.concurrency, "oracle");
    detail::read_field(o, "transport_retries", c.oracle.transport_retries, "oracle");
    detail::read_field(o, "parse_regenerations", c.oracle.parse_regenerations, "oracle");
    detail::read_field(o, "failure_rate_ceiling", c.oracle.failure_rate_ceiling, "oracle");
  }
  if (j.contains("prover")) {
    const auto& p = j.at("prover");
    detail::reject_unknown(p, {"kind", "rules", "bridge_cmd"}, "prover");
    detail::read_field(p, "kind", c.prover.kind, "prover");
    detail::read_field(p, "rules", c.prover.rules, "prover");
    detail::read_field(p, "bridge_cmd", c.prover.bridge_cmd, "prover");
    detail::check_enum(c.prover.kind, {"toy", "bridge"}, "prover.kind");
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    detail::reject_unknown(s, {"priority", "workers", "dedup_states", "logprob_scope"}, "search");
    detail::read_field(s, "priority", c.search.priority, "search");
    detail::read_field(s, "workers", c.search.workers, "search");
    detail::read_field(s, "dedup_states", c.search.dedup_states, "search");
    detail::read_field(s, "logprob_scope", c.search.logprob_scope, "search");
    detail::check_enum(c.search.priority, {"standard", "literal"}, "search.priority");
  }
  if (j.contains("star")) {
    const auto& s = j.at("star");
    detail::reject_unknown(s,
                           {"N", "K", "T", "timeout_ms", "max_proofs", "iterations",
                            "dataset_mode", "trainer_cmd", "thought_dataset"},
                           "star");
    detail::read_field(s, "N", c.star.n_max, "star");
    detail::read_field(s, "K", c.star.k_attempts, "star");
    detail::read_field(s, "T", c.star.temperature, "star");
    detail::read_field(s, "timeout_ms", c.star.timeout_ms, "star");
    detail::read_field(s, "max_proofs", c.star.max_proofs, "star");
    detail::read_field(s, "iterations", c.star.iterations, "star");
    detail::read_field(s, "dataset_mode", c.star.dataset_mode, "star");
    detail::read_field(s, "trainer_cmd", c.star.trainer_cmd, "star");
    detail::read_field(s, "thought_dataset", c.star.thought_dataset, "star");
    detail::check_enum(c.star.dataset_mode, {"joint", "continue"}, "star.dataset_mode");
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::reject_unknown(e, {"N", "K", "S", "T", "timeout_ms", "max_proofs"}, "eval");
    detail::read_field(e, "N", c.eval.n_max, "eval");
    detail::read_field(e, "K", c.eval.k_attempts, "eval");
    detail::read_field(e, "S", c.eval.s_expansions, "eval");
    detail::read_field(e, "T", c.eval.temperature, "eval");
    detail::read_field(e, "timeout_ms", c.eval.timeout_ms, "eval");
    detail::read_field(e, "max_proofs", c.eval.max_proofs, "eval");
  }

  if (c.eval.n_max < 1) throw SchemaViolation("eval.N", "must be >= 1");
  if (c.eval.k_attempts < 1) throw SchemaViolation("eval.K", "must be >= 1");
  if (c.eval.s_expansions < 1) throw SchemaViolation("eval.S", "must be >= 1");
  if (c.star.n_max < 1) throw SchemaViolation("star.N", "must be >= 1");
  if (c.star.k_attempts < 1) throw SchemaViolation("star.K", "must be >= 1");
  if (c.star.max_proofs < 1) throw SchemaViolation("star.max_proofs", "must be >= 1");
  return c;
}

// Full materialization including defaults, so load -> serialize -> load is a
// fixed point.
inline json config_to_json(const Config& c) {
  return json{
      {"generator",
       {{"backend", c.generator.backend},
        {"url", c.generator.url},
        {"max_in_flight", c.generator.max_in_flight},
        {"mode", c.generator.mode},
        {"tactic_marker", c.generator.tactic_marker},
        {"table", c.generator.table},
        {"seed_dataset", c.generator.seed_dataset}}},
      {"oracle",
       {{"url", c.oracle.url},
        {"temperature", c.oracle.temperature},
        {"concurrency", c.oracle.concurrency},
        {"transport_retries", c.oracle.transport_retries},
        {"parse_regenerations", c.oracle.parse_regenerations},
        {"failure_rate_ceiling", c.oracle.failure_rate_ceiling}}},
      {"prover",
       {{"kind", c.prover.kind}, {"rules", c.prover.rules}, {"bridge_cmd", c.prover.bridge_cmd}}},
      {"search",
       {{"priority", c.search.priority},
        {"workers", c.search.workers},
        {"dedup_states", c.search.dedup_states},
        {"logprob_scope", c.search.logprob_scope}}},
      {"star",
       {{"N", c.star.n_max},
        {"K", c.star.k_attempts},
        {"T", c.star.temperature},
        {"timeout_ms", c.star.timeout_ms},
        {"max_proofs", c.star.max_proofs},
        {"iterations", c.star.iterations},
        {"dataset_mode", c.star.dataset_mode},
        {"trainer_cmd", c.star.trainer_cmd},
        {"thought_dataset", c.star.thought_dataset}}},
      {"eval",
       {{"N", c.eval.n_max},
        {"K", c.eval.k_attempts},
        {"S", c.eval.s_expansions},
        {"T", c.eval.temperature},
        {"timeout_ms", c.eval.timeout_ms},
        {"max_proofs", c.eval.max_proofs}}}};
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaViolation("$", "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaViolation("$", std::string("invalid JSON: ") + e.what());
  }
  // Endpoint overrides come from the environment; budgets never do.
  Config c = config_from_json(j);
  if (const char* url = std::getenv("NTP_GENERATOR_URL")) c.generator.url = url;
  if (const char* url = std::getenv("NTP_ORACLE_URL")) c.oracle.url = url;
  return c;
}

}  // namespace ntp

#endif  // NTP_CONFIG_HPP
