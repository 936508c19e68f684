#pragma once

#include "birdseye/io.hpp"
#include "birdseye/pipeline.hpp"
#include "birdseye/reactions.hpp"
#include "birdseye/sensors.hpp"
#include "birdseye/teach.hpp"

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <vector>

namespace birdseye {

struct EngineOptions {
  PipelineParams params;
  // Sensor config file that `save` and finished teach sessions write back to.
  std::optional<std::filesystem::path> sensors_path;
  double teach_epsilon_m = 0.05;
  double teach_decimation_m = 0.02;
};

struct FrameResult {
  double t_s = 0.0;
  std::vector<EntityState> entities;
  std::vector<InteractionEvent> events;
  std::vector<ReactionOutcome> reactions;
  TrackerUpdate update;
};

// The sequential engine loop state: pipeline, sensors, reactions and teaching.
// Not thread-safe; commands must be applied between frames by the owning loop.
class Engine {
 public:
  Engine(SceneCalibration calibration, SensorConfig sensors, EngineOptions options = {});

  // Frames of one fused timestamp.
  FrameResult process(const std::vector<PoseFrame>& frames);

  // Applies an operator command and returns its ack message (never throws for
  // rejected commands; the ack carries ok=false and the error).
  Json command(const Json& cmd);

  Json snapshot() const;
  Json entities_message(const FrameResult& frame) const;

  SensorConfig sensor_config() const;
  const SensorEngine& sensors() const { return sensors_; }
  const Pipeline& pipeline() const { return pipeline_; }
  const ReactionState& reaction_state() const { return reaction_state_; }
  const std::optional<TeachSession>& teach_session() const { return teach_; }
  std::size_t frames_processed() const { return frames_; }

 private:
  Json apply(const std::string& name, const Json& cmd);
  void persist_sensors(const std::optional<std::filesystem::path>& path) const;

  Pipeline pipeline_;
  SensorEngine sensors_;
  std::vector<ReactionBinding> bindings_;
  ReactionState reaction_state_;
  EngineOptions options_;
  std::optional<TeachSession> teach_;
  int teach_counter_ = 0;
  std::size_t frames_ = 0;
  std::optional<double> last_t_;
  std::vector<EntityState> last_entities_;
};

// Groups a time-ordered pose stream into fused frames (equal timestamps).
class FrameGrouper {
 public:
  // Returns the previous group once a later timestamp arrives. Throws
  // StreamError for timestamps earlier than the current group.
  std::optional<std::vector<PoseFrame>> push(PoseFrame frame);
  std::optional<std::vector<PoseFrame>> flush();

 private:
  std::vector<PoseFrame> current_;
  std::optional<double> last_emitted_t_;
};

struct ReplayOptions {
  double speed = 0.0;  // 0 = as fast as possible; otherwise pacing factor vs stream time
  bool strict = false;
  // fused-frame index -> commands applied before that frame
  std::map<std::size_t, std::vector<Json>> commands;
  // Called before every fused frame; returning false stops the replay.
  std::function<bool()> between_frames;
};

struct ReplayStats {
  std::size_t lines = 0;
  std::size_t skipped_lines = 0;
  std::size_t frames = 0;
  std::size_t events = 0;
  std::vector<Json> acks;
};

using FrameSink = std::function<void(const FrameResult&)>;

// Drives the engine from an NDJSON pose stream. Malformed lines are skipped
// with a warning unless strict; unknown views abort with ConfigError.
ReplayStats replay(Engine& engine, std::istream& poses, const ReplayOptions& options,
                   const FrameSink& sink = {});

// Command trace file: NDJSON lines {"frame": N, "cmd": ...}.
std::map<std::size_t, std::vector<Json>> parse_command_trace(std::istream& in);

}  // namespace birdseye
