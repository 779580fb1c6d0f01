#ifndef NTP_STORE_HPP
#define NTP_STORE_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ntp/config.hpp"
#include "ntp/star.hpp"

namespace ntp {

// Content-addressed run directory:
//   runs/<run_id>/{manifest.json, trajectories.jsonl, datasets/, reports/}
// run_id hashes the materialized config plus the seed, so identical inputs
// land in the same directory. Completed runs are never mutated.
class RunStore {
 public:
  explicit RunStore(std::string root) : root_(std::move(root)) {}

  static std::string run_id(const Config& config, std::uint64_t seed) {
    std::string canon = config_to_json(config).dump();
    canon += "#seed=" + std::to_string(seed);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canon)));
    return buf;
  }

  std::string open_run(const Config& config, std::uint64_t seed) {
    std::string id = run_id(config, seed);
    run_dir_ = root_ + "/" + id;
    std::filesystem::create_directories(run_dir_ + "/datasets");
    std::filesystem::create_directories(run_dir_ + "/reports");
    config_ = config;
    seed_ = seed;
    artifacts_.clear();
    return id;
  }

  const std::string& run_dir() const { return run_dir_; }

  std::string artifact_path(const std::string& rel) {
    artifacts_.push_back(rel);
    return run_dir_ + "/" + rel;
  }

  void write_manifest() const {
    auto now = std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    json manifest{{"run_id", run_id(config_, seed_)},
                  {"config_snapshot", config_to_json(config_)},
                  {"seed", seed_},
                  {"created_at", now},
                  {"artifact_paths", artifacts_}};
    std::ofstream out(run_dir_ + "/manifest.json");
    out << manifest.dump(2) << "\n";
  }

 private:
  std::string root_;
  std::string run_dir_;
  Config config_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> artifacts_;
};

}  // namespace ntp

#endif  // NTP_STORE_HPP
