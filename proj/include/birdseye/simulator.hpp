#pragma once

#include "birdseye/calibration.hpp"
#include "birdseye/pipeline.hpp"
#include "birdseye/sensors.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace birdseye {

struct Waypoint {
  double t_s = 0.0;
  Vec2 position_m = Vec2::Zero();
};

struct Actor {
  std::string name;
  EntityClass cls = EntityClass::human;
  double stature_m = 1.75;
  std::optional<RobotProfile> robot;  // required for robots
  std::vector<Waypoint> waypoints;
  double shoulder_width_m = 0.40;
  double hip_width_m = 0.30;
  double stance_width_m = 0.25;
  double initial_heading_rad = 0.0;  // used until the actor first moves
};

struct OcclusionWindow {
  std::size_t actor = 0;
  std::set<std::string> keypoints;
  double t_start_s = 0.0;
  double t_end_s = 0.0;
};

struct Scenario {
  double duration_s = 10.0;
  double fps = 30.0;
  PanoramicCamera camera;
  std::vector<RectilinearView> views = default_view_rig();
  BodyModel body;  // ratios; stature comes from each actor
  std::vector<Actor> actors;
  std::vector<OcclusionWindow> occlusions;
  double pixel_noise_px = 0.0;
  std::vector<VirtualSensor> sensors;  // only used for ground-truth containment

  void validate() const;
  std::size_t frame_count() const;
  double frame_time(std::size_t index) const { return static_cast<double>(index) / fps; }
};

struct Skeleton {
  Vec2 position_m = Vec2::Zero();
  Vec2 heading = Vec2::UnitX();
  std::map<std::string, Vec3> keypoints;
};

// Upright band model at time t; nullopt outside the actor's waypoint span.
std::optional<Skeleton> skeleton_at(const Actor& actor, const BodyModel& body, double t_s);

struct ActorTruth {
  std::size_t actor = 0;
  std::string name;
  EntityClass cls = EntityClass::human;
  bool present = false;
  Vec2 position_m = Vec2::Zero();
  Vec2 heading = Vec2::UnitX();
  std::map<std::string, Vec3> keypoints;
};

struct GroundTruth {
  double t_s = 0.0;
  std::size_t frame = 0;
  std::vector<ActorTruth> actors;
  // sensor id -> indices of actors geometrically inside (mats) without debounce
  std::map<std::string, std::vector<std::size_t>> containment;
};

struct RenderedFrame {
  std::vector<PoseFrame> frames;  // one per view
  GroundTruth truth;
};

RenderedFrame render_frame(const Scenario& scenario, std::size_t frame_index, std::uint64_t seed);

// Eight ground markers per view: pixels on a 4x2 grid intersected with z = 0.
std::vector<Correspondence> ground_markers(const PanoramicCamera& cam, const RectilinearView& view);

// Calibration fitted from exact marker correspondences for every view.
SceneCalibration calibrate_scene(const Scenario& scenario);

struct SimulationStats {
  std::size_t frames = 0;
  std::size_t pose_lines = 0;
};

// Writes one pose NDJSON line per (frame, view) and one truth line per frame.
SimulationStats run_simulation(const Scenario& scenario, std::uint64_t seed, std::ostream& poses,
                               std::ostream* truth = nullptr);

}  // namespace birdseye
