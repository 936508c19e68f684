#pragma once

#include "birdseye/calibration.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace birdseye {

enum class EntityClass { human, robot };

std::string_view to_string(EntityClass c);
// Throws ConfigError for anything but "human" / "robot".
EntityClass parse_entity_class(std::string_view s);

struct Keypoint {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

struct Detection {
  EntityClass cls = EntityClass::human;
  std::map<std::string, Keypoint> keypoints;
  std::optional<std::string> track_hint;
};

struct PoseFrame {
  double t_s = 0.0;
  std::string view_id;
  std::vector<Detection> detections;
};

enum class PositionSource { feet, height_corrected, mixed };
std::string_view to_string(PositionSource s);

struct PipelineParams {
  double min_confidence = 0.2;
  double fusion_radius_m = 0.3;
  double gate_base_m = 0.5;
  double gate_speed_mps = 2.0;
  double track_timeout_s = 0.5;
  double smoothing_alpha = 0.6;     // position
  double orientation_alpha = 0.3;   // facing direction
  double min_pair_separation_m = 0.05;
};

// One detection placed on the ground plane.
struct Observation {
  EntityClass cls = EntityClass::human;
  Vec2 position_m = Vec2::Zero();
  std::optional<Vec2> orientation;
  PositionSource source = PositionSource::feet;
  double confidence = 0.0;
  // True when the position came from complete left/right pairs (or a robot
  // profile), i.e. it is not biased by a missing side.
  bool symmetric = true;
};

// Human detection to ground position. Complete left/right pairs are reduced to
// their midpoints first; unpaired keypoints are only used when no pair exists.
// Returns nullopt when no keypoint clears the confidence floor.
std::optional<Observation> localize_detection(const Detection& det, const ViewCalibration& calib,
                                              const BodyModel& body,
                                              const PipelineParams& params = {});
std::optional<Observation> localize_detection(const Detection& det, const ViewCalibration& calib,
                                              const RobotProfile& robot,
                                              const PipelineParams& params = {});

// Facing direction from the shoulder pair (hips as fallback):
// normalize(rot90_ccw(R - L)).
std::optional<Vec2> body_orientation(const Detection& det, const ViewCalibration& calib,
                                     const BodyModel& body, const PipelineParams& params = {});

// Merges same-class observations closer than `radius_m` (single linkage).
std::vector<Observation> fuse_observations(const std::vector<Observation>& obs, double radius_m);

struct EntityState {
  std::int64_t entity_id = 0;
  EntityClass cls = EntityClass::human;
  Vec2 position_m = Vec2::Zero();
  std::optional<Vec2> orientation;
  PositionSource position_source = PositionSource::feet;
  double last_seen_s = 0.0;
  Vec2 velocity_mps = Vec2::Zero();
};

struct TrackerUpdate {
  std::vector<std::int64_t> spawned;
  std::vector<std::int64_t> lost;
};

// Greedy nearest-neighbour tracker with motion-predicted exponential smoothing.
class Tracker {
 public:
  explicit Tracker(PipelineParams params = {}) : params_(params) {}

  // `obs` must come from one fused frame. Throws StreamError if t_s does not advance.
  TrackerUpdate associate(const std::vector<Observation>& obs, double t_s);

  // Live tracks ordered by id.
  std::vector<EntityState> entities() const;
  const EntityState* find(std::int64_t id) const;
  double gate_m(double dt_s) const { return params_.gate_base_m + params_.gate_speed_mps * dt_s; }

 private:
  struct Track {
    EntityState state;
    int hits = 0;
    Vec2 last_obs = Vec2::Zero();
    double orientation_seen_s = 0.0;
  };

  void update_track(Track& tr, const Observation& o, double t_s) const;

  PipelineParams params_;
  std::map<std::int64_t, Track> tracks_;
  std::int64_t next_id_ = 1;
  std::optional<double> last_t_;
};

struct PipelineOutput {
  double t_s = 0.0;
  std::vector<EntityState> entities;
  TrackerUpdate update;
  int dropped_detections = 0;
};

// Per-frame composition: localize every detection of every view, fuse views,
// then associate.
class Pipeline {
 public:
  Pipeline(SceneCalibration calibration, PipelineParams params = {});

  // All frames must share one timestamp. Throws ConfigError on unknown view ids.
  PipelineOutput process(const std::vector<PoseFrame>& frames);

  const SceneCalibration& calibration() const { return calib_; }
  const Tracker& tracker() const { return tracker_; }
  std::int64_t dropped_total() const { return dropped_total_; }

 private:
  const RobotProfile* profile_for(const Detection& det) const;

  SceneCalibration calib_;
  PipelineParams params_;
  Tracker tracker_;
  std::int64_t dropped_total_ = 0;
};

}  // namespace birdseye
