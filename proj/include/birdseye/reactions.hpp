#pragma once

#include "birdseye/sensors.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace birdseye {

enum class ReactionKind { log, set_flag, robot_speed_from_level };

struct Reaction {
  ReactionKind kind = ReactionKind::log;
  std::string flag;                                  // set_flag
  std::vector<double> speeds{1.0, 0.6, 0.3, 0.0};    // robot_speed_from_level, indexed by level
};

// Event pattern -> reaction. An absent type matches every event of the sensor.
struct ReactionBinding {
  std::string sensor_id;
  std::optional<EventType> type;
  Reaction reaction;

  bool matches(const InteractionEvent& ev) const {
    return ev.sensor_id == sensor_id && (!type || *type == ev.type);
  }
};

struct ReactionOutcome {
  double t_s = 0.0;
  std::string sensor_id;
  ReactionKind kind = ReactionKind::log;
  std::string flag;
  bool flag_value = false;
  double robot_speed = 1.0;
};

struct ReactionState {
  std::map<std::string, bool> flags;
  std::optional<double> robot_speed;
};

// Applies bindings in binding order to each event, in event order.
std::vector<ReactionOutcome> apply_reactions(const std::vector<ReactionBinding>& bindings,
                                             const std::vector<InteractionEvent>& events,
                                             ReactionState& state);

}  // namespace birdseye
