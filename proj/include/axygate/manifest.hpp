#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace axygate {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Provenance record of one CLI invocation. Reports embed only the digest, so
// a report regenerated from the same version, config, seed, and thread count
// is byte-identical; timestamps live here, in the side manifest file.
struct RunManifest {
  std::string version = kToolVersion;
  std::string subcommand;
  std::string configDigest;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string startedAt;
  std::string finishedAt;
  std::vector<std::string> outputs;

  // digest over everything that determines the report bytes
  std::string digest() const {
    return fnv1a_hex(version + "|" + subcommand + "|" + configDigest + "|" +
                     std::to_string(seed) + "|" + std::to_string(threads));
  }

  static std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
  }

  nlohmann::json to_json() const {
    return {{"version", version},        {"subcommand", subcommand},
            {"config_digest", configDigest}, {"seed", seed},
            {"threads", threads},        {"started_at", startedAt},
            {"finished_at", finishedAt}, {"outputs", outputs},
            {"digest", digest()}};
  }
};

} // namespace axygate
