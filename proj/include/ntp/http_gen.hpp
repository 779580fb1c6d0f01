#ifndef NTP_HTTP_GEN_HPP
#define NTP_HTTP_GEN_HPP

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>

#include "ntp/annotate.hpp"
#include "ntp/generator.hpp"

namespace ntp {

// Client for a completion server:
//   POST /generate {"prompt","n","temperature","max_tokens","stop","decode"}
//   -> {"completions":[{"text","avg_logprob"}]}
// In-flight requests are bounded; completions that violate the grammar come
// back as error samples rather than faulting the batch.
class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(const std::string& base_url, int max_in_flight = 8,
                         std::string marker = kDefaultTacticMarker)
      : client_(base_url), slots_(max_in_flight), marker_(std::move(marker)) {
    client_.set_read_timeout(300, 0);
  }

  std::vector<GenSample> generate(const GenRequest& req, std::mt19937_64& /*rng*/) override {
    json body{{"prompt", render_policy_prompt(req.state_text, req.mode)},
              {"n", req.n},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens},
              {"stop", json::array({"### State"})},
              {"decode", req.decode == DecodeMode::Beam ? "beam" : "sample"}};

    Slot slot(*this);
    auto res = client_.Post("/generate", body.dump(), "application/json");
    if (!res || res->status != 200)
      throw BackendUnavailable("POST /generate failed" +
                               (res ? " with status " + std::to_string(res->status) : ""));
    json resp;
    try {
      resp = json::parse(res->body);
    } catch (const std::exception& e) {
      throw BackendUnavailable(std::string("malformed backend response: ") + e.what());
    }

    std::vector<GenSample> out;
    for (const auto& c : resp.at("completions")) {
      GenSample s;
      s.raw_text = c.at("text").get<std::string>();
      s.avg_logprob = mean_logprob(c);
      try {
        auto [thought, tactic] = parse_completion(s.raw_text, req.mode, marker_);
        s.thought = thought;
        s.tactic = tactic;
      } catch (const MalformedCompletion& e) {
        s.error = e.what();
      }
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  // Backends returning per-token arrays are reduced by arithmetic mean.
  static double mean_logprob(const json& completion) {
    const auto& lp = completion.at("avg_logprob");
    if (lp.is_array()) {
      double sum = 0.0;
      for (const auto& v : lp) sum += v.get<double>();
      return lp.empty() ? 0.0 : sum / static_cast<double>(lp.size());
    }
    return lp.get<double>();
  }

  struct Slot {
    explicit Slot(HttpGenerator& g) : gen(g) {
      std::unique_lock<std::mutex> lock(gen.mu_);
      gen.cv_.wait(lock, [&] { return gen.slots_ > 0; });
      --gen.slots_;
    }
    ~Slot() {
      std::lock_guard<std::mutex> lock(gen.mu_);
      ++gen.slots_;
      gen.cv_.notify_one();
    }
    HttpGenerator& gen;
  };

  httplib::Client client_;
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
  std::string marker_;
};

// Chat-completion transport for the annotation oracle:
//   POST /chat {"messages":[{"role","content"},...],"temperature":T}
//   -> {"content": string}
class HttpOracleClient : public OracleClient {
 public:
  explicit HttpOracleClient(const std::string& base_url) : client_(base_url) {
    client_.set_read_timeout(300, 0);
  }

  std::string complete(const std::string& system_msg, const std::string& user_msg,
                       double temperature) override {
    json body{{"messages",
               json::array({json{{"role", "system"}, {"content", system_msg}},
                            json{{"role", "user"}, {"content", user_msg}}})},
              {"temperature", temperature}};
    auto res = client_.Post("/chat", body.dump(), "application/json");
    if (!res || res->status != 200)
      throw OracleTransportError("POST /chat failed" +
                                 (res ? " with status " + std::to_string(res->status) : ""));
    try {
      return json::parse(res->body).at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw OracleTransportError(std::string("malformed oracle response: ") + e.what());
    }
  }

 private:
  httplib::Client client_;
};

}  // namespace ntp

#endif  // NTP_HTTP_GEN_HPP
