#include "birdseye/sensors.hpp"

#include "birdseye/error.hpp"
#include "birdseye/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace birdseye {

namespace {

constexpr double kBoundaryBand = 1e-9;
constexpr double kTimeEps = 1e-9;
constexpr double kSideEps = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void validate_polygon(const std::string& id, const std::vector<Vec2>& poly) {
  if (poly.size() < 3) throw ConfigError("sensor '" + id + "': polygon needs >= 3 vertices");
  for (const auto& p : poly)
    if (!p.allFinite()) throw ConfigError("sensor '" + id + "': non-finite vertex");
  if (!is_simple_polygon(poly)) throw ConfigError("sensor '" + id + "': polygon is not simple");
  const double area = signed_area(poly);
  if (area < 0.0) throw ConfigError("sensor '" + id + "': polygon must be counter-clockwise");
  if (!(area > 0.01)) throw ConfigError("sensor '" + id + "': polygon area must exceed 0.01 m^2");
}

int side_of(const BarrierGeometry& b, const Vec2& p) {
  const Vec2 ab = b.b_m - b.a_m;
  const double v = cross(ab, p - b.a_m);
  const double tol = kSideEps * ab.norm();
  return (v > tol) - (v < -tol);
}

}  // namespace

std::string_view to_string(SensorKind k) {
  switch (k) {
    case SensorKind::barrier: return "barrier";
    case SensorKind::mat: return "mat";
    case SensorKind::proximity: return "proximity";
    case SensorKind::oriented_mat: return "oriented_mat";
  }
  return "mat";
}

SensorKind parse_sensor_kind(std::string_view s) {
  if (s == "barrier") return SensorKind::barrier;
  if (s == "mat") return SensorKind::mat;
  if (s == "proximity") return SensorKind::proximity;
  if (s == "oriented_mat") return SensorKind::oriented_mat;
  throw ConfigError("unknown sensor kind '" + std::string(s) + "'");
}

std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::enter: return "enter";
    case EventType::leave: return "leave";
    case EventType::crossed: return "crossed";
    case EventType::proximity_level: return "proximity_level";
  }
  return "enter";
}

SensorKind VirtualSensor::kind() const {
  return static_cast<SensorKind>(geometry.index());
}

void VirtualSensor::validate() const {
  if (id.empty()) throw ConfigError("sensor id must not be empty");
  if (classes.empty()) throw ConfigError("sensor '" + id + "': empty class list");
  if (!(debounce_on_s >= 0.0 && debounce_off_s >= 0.0))
    throw ConfigError("sensor '" + id + "': debounce must be non-negative");
  std::visit(
      overloaded{
          [&](const BarrierGeometry& b) {
            if (!((b.a_m - b.b_m).norm() > 0.01))
              throw ConfigError("sensor '" + id + "': barrier endpoints closer than 0.01 m");
          },
          [&](const MatGeometry& m) { validate_polygon(id, m.polygon_m); },
          [&](const OrientedMatGeometry& m) {
            validate_polygon(id, m.polygon_m);
            if (std::abs(m.facing_dir.norm() - 1.0) > 1e-9)
              throw ConfigError("sensor '" + id + "': facing_dir must be a unit vector");
            if (!(m.cone_half_angle_rad > 0.0 && m.cone_half_angle_rad <= std::numbers::pi))
              throw ConfigError("sensor '" + id + "': cone half angle must lie in (0, pi]");
          },
          [&](const ProximityGeometry& p) {
            if (p.levels_m.empty()) throw ConfigError("sensor '" + id + "': no proximity levels");
            double min_gap = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < p.levels_m.size(); ++i) {
              if (!(p.levels_m[i] > 0.0))
                throw ConfigError("sensor '" + id + "': proximity levels must be positive");
              if (i > 0) {
                const double gap = p.levels_m[i - 1] - p.levels_m[i];
                if (!(gap > 0.0))
                  throw ConfigError("sensor '" + id + "': levels must be strictly decreasing");
                min_gap = std::min(min_gap, gap);
              }
            }
            if (!(p.hysteresis_m >= 0.0 && p.hysteresis_m < min_gap / 2))
              throw ConfigError("sensor '" + id + "': hysteresis must be below half the level gap");
            if (const auto* a = std::get_if<Vec2>(&p.anchor); a && !a->allFinite())
              throw ConfigError("sensor '" + id + "': non-finite anchor");
          },
      },
      geometry);
}

void normalize_orientation(VirtualSensor& sensor) {
  auto fix = [](std::vector<Vec2>& poly) {
    if (poly.size() >= 3 && signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  };
  if (auto* m = std::get_if<MatGeometry>(&sensor.geometry)) fix(m->polygon_m);
  if (auto* m = std::get_if<OrientedMatGeometry>(&sensor.geometry)) {
    fix(m->polygon_m);
    if (m->facing_dir.norm() > 0.0) m->facing_dir.normalize();
  }
}

bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly) {
  const auto n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= kBoundaryBand) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 &a = poly[i], &b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

std::optional<int> segment_crossing(const Vec2& prev, const Vec2& cur,
                                    const BarrierGeometry& barrier) {
  const int s_prev = side_of(barrier, prev);
  const int s_cur = side_of(barrier, cur);
  if (s_prev == 0) return std::nullopt;  // leaving the line, or collinear
  if (s_prev == s_cur) return std::nullopt;
  // the barrier line is reached; check the hit lies within the barrier's extent
  const Vec2 motion = cur - prev;
  const double ca = cross(motion, barrier.a_m - prev);
  const double cb = cross(motion, barrier.b_m - prev);
  if (ca * cb > 0.0) return std::nullopt;
  const double d = cross(barrier.b_m - barrier.a_m, motion);
  return d > 0.0 ? 1 : -1;
}

int proximity_level(double distance_m, std::span<const double> levels_m, double hysteresis_m,
                    int prev_level) {
  const auto count_above = [&](double d) {
    return static_cast<int>(std::count_if(levels_m.begin(), levels_m.end(),
                                          [d](double t) { return t > d; }));
  };
  const int raw = count_above(distance_m);
  if (raw >= prev_level) return raw;
  // releasing: a level is kept until the distance strictly exceeds threshold + hysteresis
  const int held = static_cast<int>(std::count_if(
      levels_m.begin(), levels_m.end(),
      [&](double t) { return t + hysteresis_m >= distance_m; }));
  return std::max(raw, std::min(prev_level, held));
}

void SensorEngine::add(VirtualSensor sensor) {
  normalize_orientation(sensor);
  sensor.validate();
  if (sensors_.contains(sensor.id))
    throw CommandError("sensor '" + sensor.id + "' already exists");
  state_[sensor.id] = {};
  sensors_.emplace(sensor.id, std::move(sensor));
}

void SensorEngine::remove(const std::string& id) {
  if (sensors_.erase(id) == 0) throw CommandError("unknown sensor '" + id + "'");
  state_.erase(id);
}

void SensorEngine::set_armed(const std::string& id, bool armed) {
  const auto it = sensors_.find(id);
  if (it == sensors_.end()) throw CommandError("unknown sensor '" + id + "'");
  if (it->second.armed != armed) state_[id] = {};
  it->second.armed = armed;
}

const VirtualSensor* SensorEngine::find(const std::string& id) const {
  const auto it = sensors_.find(id);
  return it == sensors_.end() ? nullptr : &it->second;
}

int SensorEngine::current_level(const std::string& id) const {
  const auto it = state_.find(id);
  return it == state_.end() ? 0 : it->second.level;
}

bool SensorEngine::reported_inside(const std::string& id, std::int64_t entity_id) const {
  const auto it = state_.find(id);
  if (it == state_.end()) return false;
  const auto d = it->second.dwell.find(entity_id);
  return d != it->second.dwell.end() && d->second.inside;
}

void SensorEngine::evaluate_mat(const VirtualSensor& s, SensorState& st,
                                const std::vector<const EntityState*>& ents, double t_s,
                                std::vector<InteractionEvent>& out) const {
  std::map<std::int64_t, bool> raw;
  for (const auto* e : ents) {
    bool in = false;
    if (const auto* m = std::get_if<MatGeometry>(&s.geometry)) {
      in = point_in_polygon(e->position_m, m->polygon_m);
    } else if (const auto* om = std::get_if<OrientedMatGeometry>(&s.geometry)) {
      in = e->orientation && point_in_polygon(e->position_m, om->polygon_m) &&
           e->orientation->dot(om->facing_dir) >= std::cos(om->cone_half_angle_rad) - 1e-12;
    }
    raw[e->entity_id] = in;
  }
  // entities that vanished are treated as outside until their state settles
  for (const auto& [id, d] : st.dwell) raw.try_emplace(id, false);

  for (const auto& [id, in] : raw) {
    auto& d = st.dwell[id];
    if (in == d.inside) {
      d.pending_since.reset();
    } else {
      if (!d.pending_since) d.pending_since = t_s;
      const double need = in ? s.debounce_on_s : s.debounce_off_s;
      if (t_s - *d.pending_since + kTimeEps >= need) {
        d.inside = in;
        d.pending_since.reset();
        InteractionEvent ev;
        ev.t_s = t_s;
        ev.sensor_id = s.id;
        ev.entity_id = id;
        ev.type = in ? EventType::enter : EventType::leave;
        out.push_back(std::move(ev));
      }
    }
  }
  std::erase_if(st.dwell, [&](const auto& kv) {
    const bool present = std::any_of(ents.begin(), ents.end(),
                                     [&](const EntityState* e) { return e->entity_id == kv.first; });
    return !present && !kv.second.inside && !kv.second.pending_since;
  });
}

void SensorEngine::evaluate_barrier(const VirtualSensor& s, SensorState& st,
                                    const std::vector<const EntityState*>& ents, double t_s,
                                    std::vector<InteractionEvent>& out) const {
  const auto& barrier = std::get<BarrierGeometry>(s.geometry);
  std::map<std::int64_t, Vec2> next;
  for (const auto* e : ents) {
    const auto prev = st.last_position.find(e->entity_id);
    if (prev != st.last_position.end()) {
      if (auto dir = segment_crossing(prev->second, e->position_m, barrier)) {
        InteractionEvent ev;
        ev.t_s = t_s;
        ev.sensor_id = s.id;
        ev.entity_id = e->entity_id;
        ev.type = EventType::crossed;
        ev.direction = *dir;
        out.push_back(std::move(ev));
      }
    }
    next[e->entity_id] = e->position_m;
  }
  st.last_position = std::move(next);
}

void SensorEngine::evaluate_proximity(const VirtualSensor& s, SensorState& st,
                                      const std::vector<EntityState>& all,
                                      const std::vector<const EntityState*>& ents, double t_s,
                                      std::vector<InteractionEvent>& out) const {
  const auto& prox = std::get<ProximityGeometry>(s.geometry);
  double best = std::numeric_limits<double>::infinity();
  std::optional<std::int64_t> nearest;
  auto consider = [&](const Vec2& anchor, std::optional<std::int64_t> anchor_id) {
    for (const auto* e : ents) {
      if (anchor_id && e->entity_id == *anchor_id) continue;
      const double d = (e->position_m - anchor).norm();
      if (d < best) {
        best = d;
        nearest = e->entity_id;
      }
    }
  };
  if (const auto* fixed = std::get_if<Vec2>(&prox.anchor)) {
    consider(*fixed, std::nullopt);
  } else {
    const auto& dyn = std::get<DynamicAnchor>(prox.anchor);
    bool any_anchor = false;
    for (const auto& e : all) {
      if (e.cls != dyn.cls) continue;
      any_anchor = true;
      consider(e.position_m, e.entity_id);
    }
    if (!any_anchor) return;  // dormant
  }

  const int level = proximity_level(best, prox.levels_m, prox.hysteresis_m, st.level);
  if (level == st.level) return;
  st.level = level;
  InteractionEvent ev;
  ev.t_s = t_s;
  ev.sensor_id = s.id;
  ev.entity_id = nearest;
  ev.type = EventType::proximity_level;
  ev.level = level;
  ev.distance_m = best;
  out.push_back(std::move(ev));
}

std::vector<InteractionEvent> SensorEngine::evaluate_frame(const std::vector<EntityState>& entities,
                                                           double t_s) {
  std::vector<const EntityState*> sorted;
  for (const auto& e : entities) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const EntityState* a, const EntityState* b) { return a->entity_id < b->entity_id; });

  std::vector<InteractionEvent> out;
  for (const auto& [id, s] : sensors_) {
    if (!s.armed) continue;
    std::vector<const EntityState*> ents;
    for (const auto* e : sorted)
      if (s.sensitive_to(e->cls)) ents.push_back(e);
    auto& st = state_[id];
    switch (s.kind()) {
      case SensorKind::mat:
      case SensorKind::oriented_mat: evaluate_mat(s, st, ents, t_s, out); break;
      case SensorKind::barrier: evaluate_barrier(s, st, ents, t_s, out); break;
      case SensorKind::proximity: evaluate_proximity(s, st, entities, ents, t_s, out); break;
    }
  }
  return out;
}

}  // namespace birdseye
