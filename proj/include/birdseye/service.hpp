#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

namespace birdseye {

struct ReplaySource {
  std::filesystem::path path;  // "-" reads stdin
  double speed = 0.0;
};

struct ListenSource {
  std::uint16_t port = 0;
};

struct RuntimeConfig {
  std::filesystem::path calibration_path;
  std::optional<std::filesystem::path> sensors_path;
  std::variant<ReplaySource, ListenSource> source;
  std::optional<std::uint16_t> serve_port;
  std::optional<std::filesystem::path> out_path;
  std::optional<std::filesystem::path> commands_path;
  bool strict = false;
  // Keep serving commands after a replay ends, until SIGINT/SIGTERM.
  bool hold = false;
  std::string log_level = "info";
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitStream = 3,
};

// Runs the engine loop until the pose source is exhausted (replay) or a stop
// signal arrives. Events go to `out_path` as NDJSON and to all subscribers.
int run_engine(const RuntimeConfig& config);

// Requests a graceful stop of a running run_engine (also wired to SIGINT/SIGTERM).
void request_stop();

}  // namespace birdseye
