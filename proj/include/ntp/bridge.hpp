#ifndef NTP_BRIDGE_HPP
#define NTP_BRIDGE_HPP

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "ntp/core.hpp"
#include "ntp/prover.hpp"

namespace ntp {

// Wire protocol (one JSON object per line over stdin/stdout):
//   -> {"cmd":"init","id":R,"theorem":T}
//   <- {"id":R,"ok":true,"state_id":0,"goals":G,"n_goals":N} | {"id":R,"ok":false,"error":E}
//   -> {"cmd":"tactic","id":R,"state_id":S,"tactic":T,"timeout_ms":MS}
//   <- {"id":R,"result":"new_state",...} | {"id":R,"result":"proof_finished"}
//      | {"id":R,"result":"error","message":E} | {"id":R,"result":"timeout"}

// Serves a prover over the wire protocol until EOF. Used by the toy bridge
// executable; any conforming prover can sit behind it.
inline void serve_bridge(ProverEnv& env, std::istream& in, std::ostream& out) {
  auto session = env.open_session();
  // The protocol has no explicit session handle: each init starts over, and
  // state ids refer to the most recent init. Track live states by id.
  std::vector<ProofState> states;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json reply;
    try {
      json req = json::parse(line);
      const auto id = req.at("id");
      reply["id"] = id;
      std::string cmd = req.at("cmd").get<std::string>();
      if (cmd == "init") {
        Theorem thm;
        thm.id = "bridge";
        thm.statement = req.at("theorem").get<std::string>();
        try {
          ProofState s = session->init_theorem(thm);
          states.clear();
          states.push_back(s);
          reply["ok"] = true;
          reply["state_id"] = s.state_id;
          reply["goals"] = s.goals_text;
          reply["n_goals"] = s.n_goals;
        } catch (const BadTheorem& e) {
          reply["ok"] = false;
          reply["error"] = e.what();
        }
      } else if (cmd == "tactic") {
        std::int64_t sid = req.at("state_id").get<std::int64_t>();
        const ProofState* st = nullptr;
        for (const auto& s : states)
          if (s.state_id == sid) { st = &s; break; }
        if (!st) {
          reply["result"] = "error";
          reply["message"] = "unknown state_id";
        } else {
          Tactic tac{req.at("tactic").get<std::string>()};
          std::int64_t timeout_ms = req.value("timeout_ms", std::int64_t{0});
          TacticOutcome out_ = session->apply_tactic(*st, tac, timeout_ms);
          switch (out_.kind) {
            case TacticOutcome::Kind::NewState:
              states.push_back(out_.state);
              reply["result"] = "new_state";
              reply["state_id"] = out_.state.state_id;
              reply["goals"] = out_.state.goals_text;
              reply["n_goals"] = out_.state.n_goals;
              break;
            case TacticOutcome::Kind::ProofFinished:
              reply["result"] = "proof_finished";
              break;
            case TacticOutcome::Kind::TacticError:
              reply["result"] = "error";
              reply["message"] = out_.message;
              break;
            case TacticOutcome::Kind::Timeout:
              reply["result"] = "timeout";
              break;
          }
        }
      } else {
        reply["result"] = "error";
        reply["message"] = "unknown cmd";
      }
    } catch (const std::exception& e) {
      reply["result"] = "error";
      reply["message"] = std::string("malformed request: ") + e.what();
    }
    out << reply.dump() << "\n";
    out.flush();
  }
}

namespace detail {

// A child process with line-oriented stdin/stdout pipes.
class Subprocess {
 public:
  explicit Subprocess(const std::vector<std::string>& argv) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw EnvUnavailable("pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw EnvUnavailable("fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]); close(to_child[1]);
      close(from_child[0]); close(from_child[1]);
      std::vector<char*> cargv;
      for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
      cargv.push_back(nullptr);
      execvp(cargv[0], cargv.data());
      std::perror("execvp");
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = from_child[0];
    out_fd_ = to_child[1];
  }

  ~Subprocess() {
    if (out_fd_ >= 0) close(out_fd_);
    if (in_fd_ >= 0) close(in_fd_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void write_line(const std::string& line) {
    std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      ssize_t n = ::write(out_fd_, buf.data() + off, buf.size() - off);
      if (n <= 0) throw EnvUnavailable("bridge write failed");
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    std::string line;
    char c;
    for (;;) {
      ssize_t n = ::read(in_fd_, &c, 1);
      if (n <= 0) throw EnvUnavailable("bridge closed its output");
      if (c == '\n') return line;
      line.push_back(c);
    }
  }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
};

}  // namespace detail

class BridgeProverEnv;

// One session = one exclusive bridge subprocess. Destroying the session
// returns the process to the owning pool.
class BridgeSession : public ProverSession {
 public:
  BridgeSession(BridgeProverEnv* owner, std::unique_ptr<detail::Subprocess> proc)
      : owner_(owner), proc_(std::move(proc)),
        uid_(detail::g_session_counter.fetch_add(1)) {}

  ~BridgeSession() override;

  ProofState init_theorem(const Theorem& theorem) override {
    json req{{"cmd", "init"}, {"id", next_req_++}, {"theorem", theorem.statement}};
    json resp = roundtrip(req);
    if (!resp.value("ok", false))
      throw BadTheorem(resp.value("error", std::string("init rejected")));
    ProofState s;
    s.state_id = resp.at("state_id").get<std::int64_t>();
    s.goals_text = resp.at("goals").get<std::string>();
    s.n_goals = resp.at("n_goals").get<int>();
    s.session_uid = uid_;
    return s;
  }

  TacticOutcome apply_tactic(const ProofState& state, const Tactic& tactic,
                             std::int64_t timeout_ms) override {
    if (state.session_uid != uid_) throw EnvUnavailable("state does not belong to this session");
    json req{{"cmd", "tactic"},
             {"id", next_req_++},
             {"state_id", state.state_id},
             {"tactic", tactic.text},
             {"timeout_ms", timeout_ms}};
    json resp = roundtrip(req);
    std::string result = resp.value("result", std::string("error"));
    if (result == "new_state") {
      ProofState s;
      s.state_id = resp.at("state_id").get<std::int64_t>();
      s.goals_text = resp.at("goals").get<std::string>();
      s.n_goals = resp.at("n_goals").get<int>();
      s.session_uid = uid_;
      return TacticOutcome::new_state(std::move(s));
    }
    if (result == "proof_finished") return TacticOutcome::finished();
    if (result == "timeout") return TacticOutcome::timeout();
    return TacticOutcome::error(resp.value("message", std::string("bridge error")));
  }

 private:
  json roundtrip(const json& req) {
    proc_->write_line(req.dump());
    std::string line = proc_->read_line();
    json resp;
    try {
      resp = json::parse(line);
    } catch (const std::exception& e) {
      throw EnvUnavailable(std::string("bridge sent malformed JSON: ") + e.what());
    }
    return resp;
  }

  BridgeProverEnv* owner_;
  std::unique_ptr<detail::Subprocess> proc_;
  std::uint64_t uid_;
  std::int64_t next_req_ = 1;
};

// Spawns bridge subprocesses on demand and keeps up to `pool_size` idle
// processes for reuse.
class BridgeProverEnv : public ProverEnv {
 public:
  explicit BridgeProverEnv(std::vector<std::string> argv, std::size_t pool_size = 4)
      : argv_(std::move(argv)), pool_size_(pool_size) {}

  std::unique_ptr<ProverSession> open_session() override {
    std::unique_ptr<detail::Subprocess> proc;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!idle_.empty()) {
        proc = std::move(idle_.back());
        idle_.pop_back();
      }
    }
    if (!proc) proc = std::make_unique<detail::Subprocess>(argv_);
    return std::make_unique<BridgeSession>(this, std::move(proc));
  }

 private:
  friend class BridgeSession;

  void release(std::unique_ptr<detail::Subprocess> proc) {
    std::lock_guard<std::mutex> lock(mu_);
    if (idle_.size() < pool_size_) idle_.push_back(std::move(proc));
  }

  std::vector<std::string> argv_;
  std::size_t pool_size_;
  std::mutex mu_;
  std::vector<std::unique_ptr<detail::Subprocess>> idle_;
};

inline BridgeSession::~BridgeSession() {
  if (owner_ && proc_) owner_->release(std::move(proc_));
}

}  // namespace ntp

#endif  // NTP_BRIDGE_HPP
