#pragma once

#include "birdseye/pipeline.hpp"

#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace birdseye {

struct BarrierGeometry {
  Vec2 a_m = Vec2::Zero();
  Vec2 b_m = Vec2::Zero();
};

// Simple closed polygon, counter-clockwise, no repeated closing vertex.
struct MatGeometry {
  std::vector<Vec2> polygon_m;
};

// Follows the nearest entity of `cls` (its fused position is the base keypoint).
struct DynamicAnchor {
  EntityClass cls = EntityClass::robot;
  std::string keypoint = "base";
};

struct ProximityGeometry {
  std::variant<Vec2, DynamicAnchor> anchor = DynamicAnchor{};
  std::vector<double> levels_m{3.0, 1.5, 0.7};
  double hysteresis_m = 0.15;
};

struct OrientedMatGeometry {
  std::vector<Vec2> polygon_m;
  Vec2 facing_dir = Vec2::UnitX();
  double cone_half_angle_rad = std::numbers::pi / 4;
};

enum class SensorKind { barrier, mat, proximity, oriented_mat };
std::string_view to_string(SensorKind k);
SensorKind parse_sensor_kind(std::string_view s);

using SensorGeometry =
    std::variant<BarrierGeometry, MatGeometry, ProximityGeometry, OrientedMatGeometry>;

struct VirtualSensor {
  std::string id;
  std::set<EntityClass> classes{EntityClass::human};
  bool armed = true;
  double debounce_on_s = 0.10;
  double debounce_off_s = 0.25;
  SensorGeometry geometry = MatGeometry{};

  SensorKind kind() const;
  bool sensitive_to(EntityClass c) const { return classes.contains(c); }
  // Throws ConfigError when the geometry violates its invariants.
  void validate() const;
};

// Reverses clockwise polygons so mats are stored counter-clockwise.
void normalize_orientation(VirtualSensor& sensor);

enum class EventType { enter, leave, crossed, proximity_level };
std::string_view to_string(EventType t);

struct InteractionEvent {
  double t_s = 0.0;
  std::string sensor_id;
  std::optional<std::int64_t> entity_id;
  EventType type = EventType::enter;
  int direction = 0;  // crossed
  int level = 0;      // proximity_level
  double distance_m = 0.0;

  bool operator==(const InteractionEvent&) const = default;
};

// Even-odd test; points within 1e-9 of the boundary count as inside.
bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly);

// Crossing of the motion segment prev -> cur over the barrier. Returns the sign
// of cross(b - a, cur - prev). The segment is half-open: arriving exactly on the
// barrier counts, leaving from it does not. Collinear motion never counts.
std::optional<int> segment_crossing(const Vec2& prev, const Vec2& cur,
                                    const BarrierGeometry& barrier);

// Number of thresholds above `distance_m`, released towards fewer levels only
// once the distance exceeds the crossed threshold by more than `hysteresis_m`.
int proximity_level(double distance_m, std::span<const double> levels_m, double hysteresis_m,
                    int prev_level);

// Per-frame evaluation of all sensors with debounce and hysteresis state.
class SensorEngine {
 public:
  // Throws CommandError on duplicate id, ConfigError on invalid geometry.
  void add(VirtualSensor sensor);
  void remove(const std::string& id);
  // Changing the armed flag clears the sensor's state without emitting events.
  void set_armed(const std::string& id, bool armed);

  const std::map<std::string, VirtualSensor>& sensors() const { return sensors_; }
  const VirtualSensor* find(const std::string& id) const;
  int current_level(const std::string& id) const;
  bool reported_inside(const std::string& id, std::int64_t entity_id) const;

  // Events ordered by sensor id then entity id.
  std::vector<InteractionEvent> evaluate_frame(const std::vector<EntityState>& entities,
                                               double t_s);

 private:
  struct DwellState {
    bool inside = false;
    std::optional<double> pending_since;
  };
  struct SensorState {
    std::map<std::int64_t, DwellState> dwell;
    std::map<std::int64_t, Vec2> last_position;
    int level = 0;
  };

  void evaluate_mat(const VirtualSensor& s, SensorState& st,
                    const std::vector<const EntityState*>& ents, double t_s,
                    std::vector<InteractionEvent>& out) const;
  void evaluate_barrier(const VirtualSensor& s, SensorState& st,
                        const std::vector<const EntityState*>& ents, double t_s,
                        std::vector<InteractionEvent>& out) const;
  void evaluate_proximity(const VirtualSensor& s, SensorState& st,
                          const std::vector<EntityState>& all,
                          const std::vector<const EntityState*>& ents, double t_s,
                          std::vector<InteractionEvent>& out) const;

  std::map<std::string, VirtualSensor> sensors_;
  std::map<std::string, SensorState> state_;
};

}  // namespace birdseye
