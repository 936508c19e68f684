#include "birdseye/reactions.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace birdseye {

std::vector<ReactionOutcome> apply_reactions(const std::vector<ReactionBinding>& bindings,
                                             const std::vector<InteractionEvent>& events,
                                             ReactionState& state) {
  std::vector<ReactionOutcome> out;
  for (const auto& ev : events) {
    for (const auto& b : bindings) {
      if (!b.matches(ev)) continue;
      ReactionOutcome r;
      r.t_s = ev.t_s;
      r.sensor_id = ev.sensor_id;
      r.kind = b.reaction.kind;
      switch (b.reaction.kind) {
        case ReactionKind::log:
          spdlog::info("reaction: {} {} at t={}", ev.sensor_id, to_string(ev.type), ev.t_s);
          break;
        case ReactionKind::set_flag: {
          bool value = true;
          if (ev.type == EventType::leave) value = false;
          if (ev.type == EventType::proximity_level) value = ev.level > 0;
          r.flag = b.reaction.flag;
          r.flag_value = value;
          state.flags[b.reaction.flag] = value;
          break;
        }
        case ReactionKind::robot_speed_from_level: {
          if (ev.type != EventType::proximity_level || b.reaction.speeds.empty()) continue;
          const auto idx = std::min<std::size_t>(static_cast<std::size_t>(std::max(ev.level, 0)),
                                                 b.reaction.speeds.size() - 1);
          r.robot_speed = b.reaction.speeds[idx];
          state.robot_speed = r.robot_speed;
          break;
        }
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace birdseye
