#include "birdseye/simulator.hpp"

#include "birdseye/error.hpp"
#include "birdseye/io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace birdseye {

namespace {

constexpr double kMinHeadingSpeed = 0.05;
constexpr double kTimeEps = 1e-9;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream per (seed, frame, view, actor, keypoint, purpose).
std::mt19937_64 keyed_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix(seed);
  for (auto k : keys) h = splitmix(h ^ k);
  return std::mt19937_64(h);
}

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

bool occluded(const Scenario& s, std::size_t actor, const std::string& kp, double t) {
  return std::any_of(s.occlusions.begin(), s.occlusions.end(), [&](const OcclusionWindow& w) {
    return w.actor == actor && w.keypoints.contains(kp) && t >= w.t_start_s - kTimeEps &&
           t < w.t_end_s - kTimeEps;
  });
}

}  // namespace

void Scenario::validate() const {
  if (!(fps > 0.0)) throw ConfigError("scenario fps must be positive");
  if (!(duration_s >= 0.0)) throw ConfigError("scenario duration must be non-negative");
  if (!(pixel_noise_px >= 0.0)) throw ConfigError("pixel noise must be non-negative");
  camera.validate();
  body.validate();
  for (const auto& v : views) v.validate();
  for (const auto& a : actors) {
    if (a.waypoints.empty()) throw ConfigError("actor '" + a.name + "' has no waypoints");
    for (std::size_t i = 1; i < a.waypoints.size(); ++i)
      if (!(a.waypoints[i].t_s > a.waypoints[i - 1].t_s))
        throw ConfigError("actor '" + a.name + "': waypoint times must increase");
    if (a.cls == EntityClass::robot && !a.robot)
      throw ConfigError("robot actor '" + a.name + "' needs a robot_profile");
    if (a.cls == EntityClass::human && !(a.stature_m >= 1.0 && a.stature_m <= BodyModel::kMaxStature))
      throw ConfigError("actor '" + a.name + "': stature out of range");
  }
  for (const auto& w : occlusions) {
    if (w.actor >= actors.size()) throw ConfigError("occlusion references a missing actor");
    if (!(w.t_start_s >= 0.0 && w.t_end_s >= w.t_start_s && w.t_end_s <= duration_s + kTimeEps))
      throw ConfigError("occlusion window must lie within the scenario duration");
  }
}

std::size_t Scenario::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * fps));
}

std::optional<Skeleton> skeleton_at(const Actor& actor, const BodyModel& body, double t_s) {
  const auto& wp = actor.waypoints;
  if (wp.empty()) return std::nullopt;
  Skeleton sk;
  sk.heading = Vec2(std::cos(actor.initial_heading_rad), std::sin(actor.initial_heading_rad));
  if (wp.size() == 1) {
    sk.position_m = wp.front().position_m;
  } else {
    if (t_s < wp.front().t_s - kTimeEps || t_s > wp.back().t_s + kTimeEps) return std::nullopt;
    std::size_t seg = 0;
    while (seg + 2 < wp.size() && t_s >= wp[seg + 1].t_s) ++seg;
    for (std::size_t k = 0; k <= seg; ++k) {
      const Vec2 v = (wp[k + 1].position_m - wp[k].position_m) / (wp[k + 1].t_s - wp[k].t_s);
      if (v.norm() >= kMinHeadingSpeed) sk.heading = v.normalized();
    }
    const double span = wp[seg + 1].t_s - wp[seg].t_s;
    const double s = std::clamp((t_s - wp[seg].t_s) / span, 0.0, 1.0);
    sk.position_m = wp[seg].position_m + s * (wp[seg + 1].position_m - wp[seg].position_m);
  }

  const Vec2 left(-sk.heading.y(), sk.heading.x());
  auto place = [&](const std::string& name, double offset, double height) {
    const Vec2 xy = sk.position_m + offset * left;
    sk.keypoints[name] = Vec3(xy.x(), xy.y(), height);
  };
  if (actor.cls == EntityClass::human) {
    BodyModel b = body;
    b.stature_m = actor.stature_m;
    const std::pair<Band, double> bands[] = {{Band::ankle, actor.stance_width_m},
                                             {Band::hip, actor.hip_width_m},
                                             {Band::shoulder, actor.shoulder_width_m}};
    for (const auto& [band, width] : bands) {
      place(body_keypoint_name(band, Side::left), width / 2, band_height(b, band));
      place(body_keypoint_name(band, Side::right), -width / 2, band_height(b, band));
    }
  } else if (actor.robot) {
    for (const auto& [name, h] : actor.robot->keypoint_heights_m) place(name, 0.0, h);
  }
  return sk;
}

RenderedFrame render_frame(const Scenario& scenario, std::size_t frame_index, std::uint64_t seed) {
  RenderedFrame out;
  const double t = scenario.frame_time(frame_index);
  out.truth.t_s = t;
  out.truth.frame = frame_index;

  std::vector<std::optional<Skeleton>> skeletons;
  for (std::size_t ai = 0; ai < scenario.actors.size(); ++ai) {
    const auto& actor = scenario.actors[ai];
    auto sk = skeleton_at(actor, scenario.body, t);
    ActorTruth at;
    at.actor = ai;
    at.name = actor.name;
    at.cls = actor.cls;
    at.present = sk.has_value();
    if (sk) {
      at.position_m = sk->position_m;
      at.heading = sk->heading;
      at.keypoints = sk->keypoints;
    }
    out.truth.actors.push_back(std::move(at));
    skeletons.push_back(std::move(sk));
  }

  for (const auto& sensor : scenario.sensors) {
    const std::vector<Vec2>* poly = nullptr;
    const OrientedMatGeometry* oriented = std::get_if<OrientedMatGeometry>(&sensor.geometry);
    if (const auto* m = std::get_if<MatGeometry>(&sensor.geometry)) poly = &m->polygon_m;
    if (oriented) poly = &oriented->polygon_m;
    if (!poly) continue;
    auto& inside = out.truth.containment[sensor.id];
    for (const auto& a : out.truth.actors) {
      if (!a.present || !sensor.sensitive_to(a.cls)) continue;
      bool in = point_in_polygon(a.position_m, *poly);
      if (oriented)
        in = in && a.heading.dot(oriented->facing_dir) >= std::cos(oriented->cone_half_angle_rad);
      if (in) inside.push_back(a.actor);
    }
  }

  const double sigma = scenario.pixel_noise_px;
  const double confidence = sigma == 0.0 ? 0.95 : 0.95 - std::min(0.5, sigma / 10.0);
  for (std::size_t vi = 0; vi < scenario.views.size(); ++vi) {
    const auto& view = scenario.views[vi];
    PoseFrame frame;
    frame.t_s = t;
    frame.view_id = view.id;
    for (std::size_t ai = 0; ai < skeletons.size(); ++ai) {
      if (!skeletons[ai]) continue;
      const auto& actor = scenario.actors[ai];
      Detection det;
      det.cls = actor.cls;
      if (actor.robot) det.track_hint = actor.robot->name;
      for (const auto& [name, world] : skeletons[ai]->keypoints) {
        if (occluded(scenario, ai, name, t)) continue;
        const auto px = world_point_to_view_pixel(scenario.camera, view, world);
        if (!px || !view.contains(*px)) continue;
        Vec2 noisy = *px;
        if (sigma > 0.0) {
          auto rng = keyed_rng(seed, {kNoiseStream, frame_index, vi, ai, fnv1a(name)});
          std::normal_distribution<double> noise(0.0, sigma);
          noisy.x() += noise(rng);
          noisy.y() += noise(rng);
        }
        det.keypoints[name] = Keypoint{noisy.x(), noisy.y(), confidence};
      }
      if (!det.keypoints.empty()) frame.detections.push_back(std::move(det));
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::vector<Correspondence> ground_markers(const PanoramicCamera& cam, const RectilinearView& view) {
  const double cols[] = {0.1, 0.37, 0.63, 0.9};
  const double top_rows[] = {0.25, 0.4, 0.55, 0.7};
  const double bottom_row = 0.9;
  auto hit = [&](double fu, double fv) -> std::optional<Correspondence> {
    const Vec2 px(fu * view.width_px, fv * view.height_px);
    const Vec3 ray = view_pixel_to_world_ray(cam, view, px);
    if (ray.z() > -1e-3) return std::nullopt;
    const Vec3 g = cam.position_m + ray * (-cam.position_m.z() / ray.z());
    return Correspondence{g.head<2>(), px};
  };
  std::vector<Correspondence> out;
  for (double fu : cols) {
    std::optional<Correspondence> top;
    for (double fv : top_rows)
      if ((top = hit(fu, fv))) break;
    const auto bottom = hit(fu, bottom_row);
    if (!top || !bottom) throw ConfigError("view '" + view.id + "' does not see the ground plane");
    out.push_back(*top);
    out.push_back(*bottom);
  }
  return out;
}

SceneCalibration calibrate_scene(const Scenario& scenario) {
  SceneCalibration c;
  c.camera = scenario.camera;
  c.body = scenario.body;
  c.views = scenario.views;
  for (const auto& a : scenario.actors) {
    if (!a.robot) continue;
    const bool known = std::any_of(c.robot_profiles.begin(), c.robot_profiles.end(),
                                   [&](const RobotProfile& p) { return p.name == a.robot->name; });
    if (!known) c.robot_profiles.push_back(*a.robot);
  }
  for (const auto& v : scenario.views) {
    const auto markers = ground_markers(scenario.camera, v);
    const auto fit = estimate_homography(markers);
    c.view_calibrations.push_back({v.id, fit.homography, scenario.camera.position_m, fit.rms_px});
  }
  c.validate();
  return c;
}

SimulationStats run_simulation(const Scenario& scenario, std::uint64_t seed, std::ostream& poses,
                               std::ostream* truth) {
  SimulationStats stats;
  const auto n = scenario.frame_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto rendered = render_frame(scenario, i, seed);
    for (const auto& f : rendered.frames) {
      poses << dump_line(to_json(f)) << '\n';
      ++stats.pose_lines;
    }
    if (truth) *truth << dump_line(to_json(rendered.truth)) << '\n';
    ++stats.frames;
  }
  if (!poses) throw std::runtime_error("failed to write pose stream");
  if (truth && !*truth) throw std::runtime_error("failed to write ground truth stream");
  return stats;
}

}  // namespace birdseye
