#include "birdseye/io.hpp"

#include "birdseye/error.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace birdseye {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Vec2 vec2(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(std::string(what) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(std::string(what) + ": expected [x, y, z]");
  for (const auto& v : j)
    if (!v.is_number()) throw ConfigError(std::string(what) + ": expected numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json arr(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json arr(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Reads `<name>_rad`, or `<name>_deg` converted to radians.
double angle(const Json& j, const std::string& name, double fallback) {
  if (j.contains(name + "_rad")) return j.at(name + "_rad").get<double>();
  if (j.contains(name + "_deg")) return j.at(name + "_deg").get<double>() * kDegToRad;
  return fallback;
}

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<Vec2> polygon(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected a list of points");
  std::vector<Vec2> out;
  for (const auto& p : j) out.push_back(vec2(p, what));
  return out;
}

Json polygon_json(const std::vector<Vec2>& poly) {
  Json out = Json::array();
  for (const auto& p : poly) out.push_back(arr(p));
  return out;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

EventType parse_event_type(std::string_view s) {
  if (s == "enter") return EventType::enter;
  if (s == "leave") return EventType::leave;
  if (s == "crossed") return EventType::crossed;
  if (s == "proximity_level") return EventType::proximity_level;
  throw ConfigError("unknown event type '" + std::string(s) + "'");
}

template <class F>
auto config_guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string dump_line(const Json& j) { return j.dump(); }

PanoramicCamera parse_camera(const Json& j) {
  return config_guard("camera", [&] {
    PanoramicCamera cam;
    cam.position_m = vec3(j.at("position_m"), "camera.position_m");
    cam.yaw_rad = angle(j, "yaw", 0.0);
    if (j.contains("pano")) {
      cam.pano_width_px = j.at("pano").at("width_px").get<int>();
      cam.pano_height_px = j.at("pano").at("height_px").get<int>();
    }
    cam.validate();
    return cam;
  });
}

Json to_json(const PanoramicCamera& cam) {
  return {{"position_m", arr(cam.position_m)},
          {"yaw_rad", cam.yaw_rad},
          {"pano", {{"width_px", cam.pano_width_px}, {"height_px", cam.pano_height_px}}}};
}

RectilinearView parse_view(const Json& j) {
  return config_guard("view", [&] {
    RectilinearView v;
    v.id = j.at("id").get<std::string>();
    v.pan_rad = angle(j, "pan", 0.0);
    v.tilt_rad = angle(j, "tilt", 0.0);
    v.hfov_rad = angle(j, "hfov", v.hfov_rad);
    v.width_px = value_or(j, "width_px", v.width_px);
    v.height_px = value_or(j, "height_px", v.height_px);
    v.validate();
    return v;
  });
}

Json to_json(const RectilinearView& v) {
  return {{"id", v.id},           {"pan_rad", v.pan_rad},   {"tilt_rad", v.tilt_rad},
          {"hfov_rad", v.hfov_rad}, {"width_px", v.width_px}, {"height_px", v.height_px}};
}

RobotProfile parse_robot_profile(const Json& j) {
  return config_guard("robot profile", [&] {
    RobotProfile p;
    p.name = j.at("name").get<std::string>();
    for (const auto& [k, v] : j.at("keypoint_heights_m").items()) p.keypoint_heights_m[k] = v.get<double>();
    p.base_keypoint = value_or<std::string>(j, "base_keypoint", "base");
    p.validate();
    return p;
  });
}

Json to_json(const RobotProfile& p) {
  Json heights = Json::object();
  for (const auto& [k, v] : p.keypoint_heights_m) heights[k] = v;
  return {{"name", p.name}, {"keypoint_heights_m", heights}, {"base_keypoint", p.base_keypoint}};
}

namespace {

BodyModel parse_body(const Json& j) {
  BodyModel b;
  b.stature_m = value_or(j, "stature_m", b.stature_m);
  b.hip_ratio = value_or(j, "hip_ratio", b.hip_ratio);
  b.shoulder_ratio = value_or(j, "shoulder_ratio", b.shoulder_ratio);
  b.validate();
  return b;
}

Json body_json(const BodyModel& b) {
  return {{"stature_m", b.stature_m}, {"hip_ratio", b.hip_ratio}, {"shoulder_ratio", b.shoulder_ratio}};
}

}  // namespace

SceneCalibration parse_calibration(const Json& j) {
  return config_guard("calibration", [&] {
    SceneCalibration c;
    c.camera = parse_camera(j.at("camera"));
    if (j.contains("body_model")) c.body = parse_body(j.at("body_model"));
    for (const auto& r : value_or(j, "robot_profiles", Json::array()))
      c.robot_profiles.push_back(parse_robot_profile(r));
    for (const auto& vj : j.at("views")) {
      auto view = parse_view(vj);
      if (c.find_view(view.id)) throw ConfigError("duplicate view id '" + view.id + "'");
      if (vj.contains("h_ground_to_view")) {
        const auto& hj = vj.at("h_ground_to_view");
        Mat3 h;
        for (int r = 0; r < 3; ++r)
          for (int col = 0; col < 3; ++col) h(r, col) = hj.at(r).at(col).get<double>();
        ViewCalibration vc;
        vc.view_id = view.id;
        vc.ground_to_view = Homography(h);
        vc.camera_position_m = c.camera.position_m;
        vc.rms_reprojection_px = value_or(vj, "rms_px", 0.0);
        c.view_calibrations.push_back(vc);
      }
      c.views.push_back(std::move(view));
    }
    c.validate();
    return c;
  });
}

Json to_json(const SceneCalibration& c) {
  Json robots = Json::array();
  for (const auto& r : c.robot_profiles) robots.push_back(to_json(r));
  Json views = Json::array();
  for (const auto& v : c.views) {
    Json vj = to_json(v);
    if (const auto* vc = c.find_calibration(v.id)) {
      Json h = Json::array();
      for (int r = 0; r < 3; ++r) {
        const Mat3& m = vc->ground_to_view.matrix();
        h.push_back({m(r, 0), m(r, 1), m(r, 2)});
      }
      vj["h_ground_to_view"] = h;
      vj["rms_px"] = vc->rms_reprojection_px;
    }
    views.push_back(vj);
  }
  return {{"camera", to_json(c.camera)},
          {"body_model", body_json(c.body)},
          {"robot_profiles", robots},
          {"views", views}};
}

CorrespondenceSet parse_correspondences(const Json& j) {
  return config_guard("correspondences", [&] {
    CorrespondenceSet s;
    s.view_id = j.at("view_id").get<std::string>();
    for (const auto& p : j.at("points"))
      s.points.push_back({vec2(p.at("ground_m"), "ground_m"), vec2(p.at("pixel"), "pixel")});
    return s;
  });
}

Json to_json(const CorrespondenceSet& s) {
  Json pts = Json::array();
  for (const auto& p : s.points) pts.push_back({{"ground_m", arr(p.ground_m)}, {"pixel", arr(p.pixel)}});
  return {{"view_id", s.view_id}, {"points", pts}};
}

VirtualSensor parse_sensor(const Json& j) {
  return config_guard("sensor", [&] {
    VirtualSensor s;
    s.id = j.at("id").get<std::string>();
    const auto kind = parse_sensor_kind(j.at("kind").get<std::string>());
    if (j.contains("classes")) {
      s.classes.clear();
      for (const auto& c : j.at("classes")) s.classes.insert(parse_entity_class(c.get<std::string>()));
    }
    s.armed = value_or(j, "armed", true);
    s.debounce_on_s = value_or(j, "debounce_on_s", s.debounce_on_s);
    s.debounce_off_s = value_or(j, "debounce_off_s", s.debounce_off_s);
    switch (kind) {
      case SensorKind::barrier:
        s.geometry = BarrierGeometry{vec2(j.at("a_m"), "a_m"), vec2(j.at("b_m"), "b_m")};
        break;
      case SensorKind::mat:
        s.geometry = MatGeometry{polygon(j.at("polygon_m"), "polygon_m")};
        break;
      case SensorKind::oriented_mat: {
        OrientedMatGeometry g;
        g.polygon_m = polygon(j.at("polygon_m"), "polygon_m");
        g.facing_dir = vec2(j.at("facing_dir"), "facing_dir");
        g.cone_half_angle_rad = angle(j, "cone_half_angle", g.cone_half_angle_rad);
        s.geometry = g;
        break;
      }
      case SensorKind::proximity: {
        ProximityGeometry g;
        if (j.contains("anchor")) {
          const auto& a = j.at("anchor");
          if (a.is_array()) {
            g.anchor = vec2(a, "anchor");
          } else if (a.contains("static")) {
            g.anchor = vec2(a.at("static"), "anchor.static");
          } else {
            const auto& d = a.at("dynamic");
            DynamicAnchor dyn;
            dyn.cls = parse_entity_class(value_or<std::string>(d, "class", "robot"));
            dyn.keypoint = value_or<std::string>(d, "keypoint", "base");
            g.anchor = dyn;
          }
        }
        if (j.contains("levels_m")) g.levels_m = j.at("levels_m").get<std::vector<double>>();
        g.hysteresis_m = value_or(j, "hysteresis_m", g.hysteresis_m);
        s.geometry = g;
        break;
      }
    }
    normalize_orientation(s);
    s.validate();
    return s;
  });
}

Json to_json(const VirtualSensor& s) {
  Json j = {{"id", s.id}, {"kind", std::string(to_string(s.kind()))}};
  Json classes = Json::array();
  for (auto c : s.classes) classes.push_back(std::string(to_string(c)));
  j["classes"] = classes;
  j["armed"] = s.armed;
  if (const auto* b = std::get_if<BarrierGeometry>(&s.geometry)) {
    j["a_m"] = arr(b->a_m);
    j["b_m"] = arr(b->b_m);
  } else if (const auto* m = std::get_if<MatGeometry>(&s.geometry)) {
    j["polygon_m"] = polygon_json(m->polygon_m);
  } else if (const auto* om = std::get_if<OrientedMatGeometry>(&s.geometry)) {
    j["polygon_m"] = polygon_json(om->polygon_m);
    j["facing_dir"] = arr(om->facing_dir);
    j["cone_half_angle_rad"] = om->cone_half_angle_rad;
  } else if (const auto* p = std::get_if<ProximityGeometry>(&s.geometry)) {
    if (const auto* fixed = std::get_if<Vec2>(&p->anchor)) {
      j["anchor"] = {{"static", arr(*fixed)}};
    } else {
      const auto& d = std::get<DynamicAnchor>(p->anchor);
      j["anchor"] = {{"dynamic", {{"class", std::string(to_string(d.cls))}, {"keypoint", d.keypoint}}}};
    }
    j["levels_m"] = p->levels_m;
    j["hysteresis_m"] = p->hysteresis_m;
  }
  if (s.kind() != SensorKind::proximity) {
    j["debounce_on_s"] = s.debounce_on_s;
    j["debounce_off_s"] = s.debounce_off_s;
  }
  return j;
}

ReactionBinding parse_reaction_binding(const Json& j) {
  return config_guard("reaction", [&] {
    ReactionBinding b;
    b.sensor_id = j.at("sensor_id").get<std::string>();
    if (j.contains("type")) b.type = parse_event_type(j.at("type").get<std::string>());
    const auto& r = j.at("reaction");
    if (r.is_string()) {
      if (r.get<std::string>() == "log") {
        b.reaction.kind = ReactionKind::log;
      } else if (r.get<std::string>() == "robot_speed_from_level") {
        b.reaction.kind = ReactionKind::robot_speed_from_level;
      } else {
        throw ConfigError("unknown reaction '" + r.get<std::string>() + "'");
      }
    } else if (r.contains("set_flag")) {
      b.reaction.kind = ReactionKind::set_flag;
      b.reaction.flag = r.at("set_flag").get<std::string>();
    } else if (r.contains("robot_speed_from_level")) {
      b.reaction.kind = ReactionKind::robot_speed_from_level;
      if (r.at("robot_speed_from_level").is_array())
        b.reaction.speeds = r.at("robot_speed_from_level").get<std::vector<double>>();
    } else if (r.contains("log")) {
      b.reaction.kind = ReactionKind::log;
    } else {
      throw ConfigError("unknown reaction descriptor");
    }
    return b;
  });
}

Json to_json(const ReactionBinding& b) {
  Json j = {{"sensor_id", b.sensor_id}};
  if (b.type) j["type"] = std::string(to_string(*b.type));
  switch (b.reaction.kind) {
    case ReactionKind::log: j["reaction"] = "log"; break;
    case ReactionKind::set_flag: j["reaction"] = {{"set_flag", b.reaction.flag}}; break;
    case ReactionKind::robot_speed_from_level:
      j["reaction"] = {{"robot_speed_from_level", b.reaction.speeds}};
      break;
  }
  return j;
}

Json to_json(const ReactionOutcome& r) {
  Json j = {{"t", r.t_s}, {"sensor_id", r.sensor_id}};
  switch (r.kind) {
    case ReactionKind::log: j["reaction"] = "log"; break;
    case ReactionKind::set_flag:
      j["reaction"] = "set_flag";
      j["flag"] = r.flag;
      j["value"] = r.flag_value;
      break;
    case ReactionKind::robot_speed_from_level:
      j["reaction"] = "robot_speed";
      j["value"] = r.robot_speed;
      break;
  }
  return j;
}

Json to_json(const ReactionState& s) {
  Json flags = Json::object();
  for (const auto& [k, v] : s.flags) flags[k] = v;
  return {{"flags", flags}, {"robot_speed", s.robot_speed ? Json(*s.robot_speed) : Json(nullptr)}};
}

SensorConfig parse_sensor_config(const Json& j) {
  return config_guard("sensor config", [&] {
    SensorConfig c;
    for (const auto& s : j.at("sensors")) {
      auto sensor = parse_sensor(s);
      for (const auto& other : c.sensors)
        if (other.id == sensor.id) throw ConfigError("duplicate sensor id '" + sensor.id + "'");
      c.sensors.push_back(std::move(sensor));
    }
    for (const auto& r : value_or(j, "reactions", Json::array())) {
      auto b = parse_reaction_binding(r);
      const bool known = std::any_of(c.sensors.begin(), c.sensors.end(),
                                     [&](const VirtualSensor& s) { return s.id == b.sensor_id; });
      if (!known) throw ConfigError("reaction references unknown sensor '" + b.sensor_id + "'");
      c.reactions.push_back(std::move(b));
    }
    return c;
  });
}

Json to_json(const SensorConfig& c) {
  Json sensors = Json::array();
  for (const auto& s : c.sensors) sensors.push_back(to_json(s));
  Json j = {{"sensors", sensors}};
  if (!c.reactions.empty()) {
    Json reactions = Json::array();
    for (const auto& r : c.reactions) reactions.push_back(to_json(r));
    j["reactions"] = reactions;
  }
  return j;
}

PoseFrame parse_pose_frame(const Json& j) {
  try {
    PoseFrame f;
    f.t_s = j.at("t").get<double>();
    if (!std::isfinite(f.t_s)) throw StreamError("non-finite timestamp");
    f.view_id = j.at("view_id").get<std::string>();
    for (const auto& dj : j.at("detections")) {
      Detection d;
      d.cls = parse_entity_class(dj.at("class").get<std::string>());
      bool any_positive = false;
      for (const auto& [name, kj] : dj.at("keypoints").items()) {
        if (!kj.is_array() || kj.size() != 3) throw StreamError("keypoint '" + name + "' must be [u, v, c]");
        Keypoint k{kj[0].get<double>(), kj[1].get<double>(), kj[2].get<double>()};
        if (!std::isfinite(k.u) || !std::isfinite(k.v) || !(k.confidence >= 0.0 && k.confidence <= 1.0))
          throw StreamError("keypoint '" + name + "' out of range");
        any_positive |= k.confidence > 0.0;
        d.keypoints.emplace(name, k);
      }
      if (dj.contains("track_hint") && !dj.at("track_hint").is_null())
        d.track_hint = dj.at("track_hint").get<std::string>();
      if (any_positive) f.detections.push_back(std::move(d));
    }
    return f;
  } catch (const Json::exception& e) {
    throw StreamError(std::string("malformed pose frame: ") + e.what());
  } catch (const ConfigError& e) {
    throw StreamError(std::string("malformed pose frame: ") + e.what());
  }
}

PoseFrame parse_pose_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw StreamError(std::string("malformed pose line: ") + e.what());
  }
  return parse_pose_frame(j);
}

Json to_json(const PoseFrame& f) {
  Json dets = Json::array();
  for (const auto& d : f.detections) {
    Json kps = Json::object();
    for (const auto& [name, k] : d.keypoints) kps[name] = {k.u, k.v, k.confidence};
    Json dj = {{"class", std::string(to_string(d.cls))}, {"keypoints", kps}};
    if (d.track_hint) dj["track_hint"] = *d.track_hint;
    dets.push_back(dj);
  }
  return {{"t", f.t_s}, {"view_id", f.view_id}, {"detections", dets}};
}

Json to_json(const InteractionEvent& ev) {
  Json j = {{"t", ev.t_s},
            {"sensor_id", ev.sensor_id},
            {"entity_id", ev.entity_id ? Json(*ev.entity_id) : Json(nullptr)},
            {"type", std::string(to_string(ev.type))}};
  if (ev.type == EventType::crossed) j["direction"] = ev.direction;
  if (ev.type == EventType::proximity_level) {
    j["level"] = ev.level;
    j["distance_m"] = number_or_null(ev.distance_m);
  }
  return j;
}

InteractionEvent parse_event(const Json& j) {
  return config_guard("event", [&] {
    InteractionEvent ev;
    ev.t_s = j.at("t").get<double>();
    ev.sensor_id = j.at("sensor_id").get<std::string>();
    if (!j.at("entity_id").is_null()) ev.entity_id = j.at("entity_id").get<std::int64_t>();
    ev.type = parse_event_type(j.at("type").get<std::string>());
    ev.direction = value_or(j, "direction", 0);
    ev.level = value_or(j, "level", 0);
    if (j.contains("distance_m"))
      ev.distance_m = j.at("distance_m").is_null() ? std::numeric_limits<double>::infinity()
                                                   : j.at("distance_m").get<double>();
    return ev;
  });
}

Json to_json(const EntityState& e) {
  return {{"id", e.entity_id},
          {"class", std::string(to_string(e.cls))},
          {"position_m", arr(e.position_m)},
          {"orientation", e.orientation ? arr(*e.orientation) : Json(nullptr)},
          {"source", std::string(to_string(e.position_source))},
          {"velocity_mps", arr(e.velocity_mps)},
          {"last_seen", e.last_seen_s}};
}

Scenario parse_scenario(const Json& j) {
  return config_guard("scenario", [&] {
    Scenario s;
    s.duration_s = j.at("duration_s").get<double>();
    s.fps = value_or(j, "fps", s.fps);
    s.pixel_noise_px = value_or(j, "pixel_noise_px", 0.0);
    if (j.contains("camera")) s.camera = parse_camera(j.at("camera"));
    if (j.contains("views")) {
      s.views.clear();
      for (const auto& v : j.at("views")) s.views.push_back(parse_view(v));
    }
    if (j.contains("body_model")) s.body = parse_body(j.at("body_model"));
    for (const auto& aj : j.at("actors")) {
      Actor a;
      a.name = value_or<std::string>(aj, "name", "actor" + std::to_string(s.actors.size()));
      a.cls = parse_entity_class(aj.at("class").get<std::string>());
      a.stature_m = value_or(aj, "stature_m", a.stature_m);
      if (aj.contains("robot_profile")) a.robot = parse_robot_profile(aj.at("robot_profile"));
      for (const auto& w : aj.at("waypoints")) {
        if (w.is_array())
          a.waypoints.push_back({w.at(0).get<double>(), vec2(w.at(1), "waypoint")});
        else
          a.waypoints.push_back({w.at("t").get<double>(), vec2(w.at("position_m"), "waypoint")});
      }
      a.shoulder_width_m = value_or(aj, "shoulder_width_m", a.shoulder_width_m);
      a.hip_width_m = value_or(aj, "hip_width_m", a.hip_width_m);
      a.stance_width_m = value_or(aj, "stance_width_m", a.stance_width_m);
      a.initial_heading_rad = angle(aj, "heading", 0.0);
      s.actors.push_back(std::move(a));
    }
    for (const auto& oj : value_or(j, "occlusions", Json::array())) {
      OcclusionWindow w;
      const auto& ref = oj.at("actor");
      if (ref.is_number_integer()) {
        w.actor = ref.get<std::size_t>();
      } else {
        const auto name = ref.get<std::string>();
        const auto it = std::find_if(s.actors.begin(), s.actors.end(),
                                     [&](const Actor& a) { return a.name == name; });
        if (it == s.actors.end()) throw ConfigError("occlusion references unknown actor '" + name + "'");
        w.actor = static_cast<std::size_t>(it - s.actors.begin());
      }
      for (const auto& k : oj.at("keypoints")) w.keypoints.insert(k.get<std::string>());
      w.t_start_s = oj.at("t_start").get<double>();
      w.t_end_s = oj.at("t_end").get<double>();
      s.occlusions.push_back(std::move(w));
    }
    if (j.contains("sensors")) {
      const auto& sj = j.at("sensors");
      s.sensors = parse_sensor_config(sj.is_array() ? Json{{"sensors", sj}} : sj).sensors;
    }
    s.validate();
    return s;
  });
}

Json to_json(const GroundTruth& g) {
  Json actors = Json::array();
  for (const auto& a : g.actors) {
    Json aj = {{"actor", a.actor}, {"name", a.name}, {"class", std::string(to_string(a.cls))},
               {"present", a.present}};
    if (a.present) {
      aj["position_m"] = arr(a.position_m);
      aj["heading"] = arr(a.heading);
    }
    actors.push_back(aj);
  }
  Json containment = Json::object();
  for (const auto& [id, inside] : g.containment) containment[id] = inside;
  return {{"t", g.t_s}, {"frame", g.frame}, {"actors", actors}, {"containment", containment}};
}

}  // namespace birdseye
