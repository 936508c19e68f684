#pragma once

#include "birdseye/calibration.hpp"
#include "birdseye/pipeline.hpp"
#include "birdseye/reactions.hpp"
#include "birdseye/sensors.hpp"
#include "birdseye/simulator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace birdseye {

using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

// Calibration file.
SceneCalibration parse_calibration(const Json& j);
Json to_json(const SceneCalibration& calib);
PanoramicCamera parse_camera(const Json& j);
Json to_json(const PanoramicCamera& cam);
RectilinearView parse_view(const Json& j);
Json to_json(const RectilinearView& view);
RobotProfile parse_robot_profile(const Json& j);
Json to_json(const RobotProfile& profile);

// Correspondence file: {"view_id": ..., "points": [{"ground_m": [x, y], "pixel": [u, v]}]}.
struct CorrespondenceSet {
  std::string view_id;
  std::vector<Correspondence> points;
};
CorrespondenceSet parse_correspondences(const Json& j);
Json to_json(const CorrespondenceSet& set);

// Sensor configuration file.
struct SensorConfig {
  std::vector<VirtualSensor> sensors;
  std::vector<ReactionBinding> reactions;
};
VirtualSensor parse_sensor(const Json& j);
Json to_json(const VirtualSensor& sensor);
SensorConfig parse_sensor_config(const Json& j);
Json to_json(const SensorConfig& config);
ReactionBinding parse_reaction_binding(const Json& j);
Json to_json(const ReactionBinding& binding);
Json to_json(const ReactionOutcome& outcome);
Json to_json(const ReactionState& state);

// Pose stream line. Throws StreamError for malformed input.
PoseFrame parse_pose_frame(const Json& j);
PoseFrame parse_pose_line(const std::string& line);
Json to_json(const PoseFrame& frame);

Json to_json(const InteractionEvent& ev);
InteractionEvent parse_event(const Json& j);
Json to_json(const EntityState& e);

Scenario parse_scenario(const Json& j);
Json to_json(const GroundTruth& truth);

// Compact single-line dump used for every NDJSON stream.
std::string dump_line(const Json& j);

}  // namespace birdseye
