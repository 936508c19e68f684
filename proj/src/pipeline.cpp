#include "birdseye/pipeline.hpp"

#include "birdseye/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace birdseye {

std::string_view to_string(EntityClass c) { return c == EntityClass::human ? "human" : "robot"; }

EntityClass parse_entity_class(std::string_view s) {
  if (s == "human") return EntityClass::human;
  if (s == "robot") return EntityClass::robot;
  throw ConfigError("unknown entity class '" + std::string(s) + "'");
}

std::string_view to_string(PositionSource s) {
  switch (s) {
    case PositionSource::feet: return "feet";
    case PositionSource::height_corrected: return "height_corrected";
    case PositionSource::mixed: return "mixed";
  }
  return "mixed";
}

namespace {

struct Lifted {
  Vec2 pos;
  double confidence;
  bool on_ground;
};

std::optional<Lifted> lift_keypoint(const ViewCalibration& calib, const Keypoint& kp, double h) {
  try {
    return Lifted{lift_at_height(calib, Vec2(kp.u, kp.v), h), kp.confidence, h == 0.0};
  } catch (const HorizonError&) {
    return std::nullopt;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

PositionSource source_of(bool any_ground, bool any_elevated) {
  if (any_ground && any_elevated) return PositionSource::mixed;
  return any_ground ? PositionSource::feet : PositionSource::height_corrected;
}

// Confidence-weighted mean of candidates; `samples` feeds the reported confidence.
Observation combine(EntityClass cls, const std::vector<Lifted>& candidates,
                    const std::vector<double>& samples, bool symmetric) {
  Observation o;
  o.cls = cls;
  o.symmetric = symmetric;
  Vec2 acc = Vec2::Zero();
  double wsum = 0.0;
  bool ground = false, elevated = false;
  for (const auto& c : candidates) {
    acc += c.confidence * c.pos;
    wsum += c.confidence;
    (c.on_ground ? ground : elevated) = true;
  }
  o.position_m = acc / wsum;
  o.source = source_of(ground, elevated);
  o.confidence = std::accumulate(samples.begin(), samples.end(), 0.0) /
                 static_cast<double>(samples.size());
  return o;
}

// Lifted left/right positions of a band when both sides clear the floor.
std::optional<std::pair<Lifted, Lifted>> lifted_pair(const Detection& det,
                                                     const ViewCalibration& calib,
                                                     const BodyModel& body, Band band,
                                                     double min_conf) {
  const auto l = det.keypoints.find(body_keypoint_name(band, Side::left));
  const auto r = det.keypoints.find(body_keypoint_name(band, Side::right));
  if (l == det.keypoints.end() || r == det.keypoints.end()) return std::nullopt;
  if (l->second.confidence < min_conf || r->second.confidence < min_conf) return std::nullopt;
  const double h = band_height(body, band);
  auto ll = lift_keypoint(calib, l->second, h);
  auto rl = lift_keypoint(calib, r->second, h);
  if (!ll || !rl) return std::nullopt;
  return std::make_pair(*ll, *rl);
}

}  // namespace

std::optional<Observation> localize_detection(const Detection& det, const ViewCalibration& calib,
                                              const BodyModel& body,
                                              const PipelineParams& params) {
  std::vector<Lifted> pairs, singles;
  std::vector<double> pair_conf, single_conf;
  for (Band band : {Band::ankle, Band::hip, Band::shoulder}) {
    if (auto p = lifted_pair(det, calib, body, band, params.min_confidence)) {
      const double c = 0.5 * (p->first.confidence + p->second.confidence);
      pairs.push_back({0.5 * (p->first.pos + p->second.pos), c, p->first.on_ground});
      pair_conf.push_back(p->first.confidence);
      pair_conf.push_back(p->second.confidence);
    }
  }
  if (!pairs.empty()) return combine(det.cls, pairs, pair_conf, true);

  for (const auto& [name, kp] : det.keypoints) {
    if (kp.confidence < params.min_confidence) continue;
    const auto bk = parse_body_keypoint(name);
    if (!bk) continue;
    if (auto l = lift_keypoint(calib, kp, band_height(body, bk->band))) {
      singles.push_back(*l);
      single_conf.push_back(kp.confidence);
    }
  }
  if (singles.empty()) return std::nullopt;
  return combine(det.cls, singles, single_conf, false);
}

std::optional<Observation> localize_detection(const Detection& det, const ViewCalibration& calib,
                                              const RobotProfile& robot,
                                              const PipelineParams& params) {
  std::vector<Lifted> lifted;
  std::vector<double> conf;
  for (const auto& [name, kp] : det.keypoints) {
    if (kp.confidence < params.min_confidence) continue;
    const auto h = robot.keypoint_heights_m.find(name);
    if (h == robot.keypoint_heights_m.end()) continue;
    if (auto l = lift_keypoint(calib, kp, h->second)) {
      lifted.push_back(*l);
      conf.push_back(kp.confidence);
    }
  }
  if (lifted.empty()) return std::nullopt;
  return combine(det.cls, lifted, conf, true);
}

std::optional<Vec2> body_orientation(const Detection& det, const ViewCalibration& calib,
                                     const BodyModel& body, const PipelineParams& params) {
  auto p = lifted_pair(det, calib, body, Band::shoulder, params.min_confidence);
  if (!p) p = lifted_pair(det, calib, body, Band::hip, params.min_confidence);
  if (!p) return std::nullopt;
  const Vec2 across = p->second.pos - p->first.pos;
  if (across.norm() < params.min_pair_separation_m) return std::nullopt;
  return Vec2(-across.y(), across.x()).normalized();
}

std::vector<Observation> fuse_observations(const std::vector<Observation>& obs, double radius_m) {
  const auto n = obs.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (obs[i].cls == obs[j].cls && (obs[i].position_m - obs[j].position_m).norm() < radius_m)
        parent[root(j)] = root(i);

  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[root(i)].push_back(i);

  std::vector<Observation> out;
  for (const auto& [r, members] : clusters) {
    const bool any_symmetric = std::any_of(members.begin(), members.end(),
                                           [&](std::size_t i) { return obs[i].symmetric; });
    Observation f;
    f.cls = obs[r].cls;
    f.symmetric = any_symmetric;
    Vec2 acc = Vec2::Zero(), facing = Vec2::Zero();
    double wsum = 0.0, csum = 0.0;
    int used = 0;
    bool feet = false, corrected = false, has_facing = false;
    for (std::size_t i : members) {
      const auto& o = obs[i];
      if (any_symmetric && !o.symmetric) continue;
      acc += o.confidence * o.position_m;
      wsum += o.confidence;
      csum += o.confidence;
      ++used;
      feet |= o.source != PositionSource::height_corrected;
      corrected |= o.source != PositionSource::feet;
      if (o.orientation) {
        facing += o.confidence * *o.orientation;
        has_facing = true;
      }
    }
    f.position_m = acc / wsum;
    f.confidence = csum / used;
    f.source = source_of(feet, corrected);
    if (has_facing && facing.norm() > 1e-12) f.orientation = facing.normalized();
    out.push_back(f);
  }
  return out;
}

void Tracker::update_track(Track& tr, const Observation& o, double t_s) const {
  auto& s = tr.state;
  const double dt = t_s - s.last_seen_s;
  const double a = params_.smoothing_alpha;
  if (tr.hits == 1) {
    // two-point initialisation
    s.velocity_mps = (o.position_m - tr.last_obs) / dt;
    s.position_m = o.position_m;
  } else {
    const Vec2 predicted = s.position_m + s.velocity_mps * dt;
    const Vec2 smoothed = predicted + a * (o.position_m - predicted);
    s.velocity_mps = s.velocity_mps + a * ((smoothed - s.position_m) / dt - s.velocity_mps);
    s.position_m = smoothed;
  }
  if (o.orientation) {
    Vec2 f = *o.orientation;
    if (s.orientation) {
      const double b = params_.orientation_alpha;
      const Vec2 blend = b * f + (1.0 - b) * *s.orientation;
      if (blend.norm() > 1e-9) f = blend.normalized();
    }
    s.orientation = f;
    tr.orientation_seen_s = t_s;
  } else if (s.orientation && t_s - tr.orientation_seen_s > params_.track_timeout_s) {
    s.orientation.reset();
  }
  s.position_source = o.source;
  s.last_seen_s = t_s;
  tr.last_obs = o.position_m;
  ++tr.hits;
}

TrackerUpdate Tracker::associate(const std::vector<Observation>& obs, double t_s) {
  if (last_t_ && !(t_s > *last_t_))
    throw StreamError("pose stream time must advance (got " + std::to_string(t_s) + " after " +
                      std::to_string(*last_t_) + ")");
  last_t_ = t_s;

  TrackerUpdate update;
  std::vector<std::tuple<double, std::int64_t, std::size_t>> pairs;
  for (const auto& [id, tr] : tracks_) {
    const double dt = t_s - tr.state.last_seen_s;
    if (dt > params_.track_timeout_s) continue;
    for (std::size_t j = 0; j < obs.size(); ++j) {
      if (obs[j].cls != tr.state.cls) continue;
      const double d = (obs[j].position_m - tr.state.position_m).norm();
      if (d <= gate_m(dt)) pairs.emplace_back(d, id, j);
    }
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<bool> obs_used(obs.size(), false);
  std::map<std::int64_t, bool> track_used;
  for (const auto& [d, id, j] : pairs) {
    if (obs_used[j] || track_used[id]) continue;
    obs_used[j] = true;
    track_used[id] = true;
    update_track(tracks_.at(id), obs[j], t_s);
  }

  for (auto it = tracks_.begin(); it != tracks_.end();) {
    if (t_s - it->second.state.last_seen_s > params_.track_timeout_s) {
      update.lost.push_back(it->first);
      it = tracks_.erase(it);
    } else {
      ++it;
    }
  }

  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (obs_used[j]) continue;
    Track tr;
    tr.state.entity_id = next_id_++;
    tr.state.cls = obs[j].cls;
    tr.state.position_m = obs[j].position_m;
    tr.state.orientation = obs[j].orientation;
    tr.state.position_source = obs[j].source;
    tr.state.last_seen_s = t_s;
    tr.hits = 1;
    tr.last_obs = obs[j].position_m;
    tr.orientation_seen_s = t_s;
    update.spawned.push_back(tr.state.entity_id);
    tracks_.emplace(tr.state.entity_id, std::move(tr));
  }
  return update;
}

std::vector<EntityState> Tracker::entities() const {
  std::vector<EntityState> out;
  out.reserve(tracks_.size());
  for (const auto& [id, tr] : tracks_) out.push_back(tr.state);
  return out;
}

const EntityState* Tracker::find(std::int64_t id) const {
  const auto it = tracks_.find(id);
  return it == tracks_.end() ? nullptr : &it->second.state;
}

Pipeline::Pipeline(SceneCalibration calibration, PipelineParams params)
    : calib_(std::move(calibration)), params_(params), tracker_(params) {
  calib_.validate();
}

const RobotProfile* Pipeline::profile_for(const Detection& det) const {
  if (det.track_hint) {
    for (const auto& p : calib_.robot_profiles)
      if (p.name == *det.track_hint) return &p;
  }
  for (const auto& p : calib_.robot_profiles)
    for (const auto& [name, kp] : det.keypoints)
      if (p.keypoint_heights_m.contains(name)) return &p;
  return nullptr;
}

PipelineOutput Pipeline::process(const std::vector<PoseFrame>& frames) {
  PipelineOutput out;
  if (frames.empty()) return out;
  out.t_s = frames.front().t_s;

  std::vector<Observation> obs;
  for (const auto& frame : frames) {
    const auto* calib = calib_.find_calibration(frame.view_id);
    if (!calib) throw ConfigError("pose frame references unknown view '" + frame.view_id + "'");
    for (const auto& det : frame.detections) {
      std::optional<Observation> o;
      if (det.cls == EntityClass::human) {
        o = localize_detection(det, *calib, calib_.body, params_);
        if (o) o->orientation = body_orientation(det, *calib, calib_.body, params_);
      } else if (const auto* profile = profile_for(det)) {
        o = localize_detection(det, *calib, *profile, params_);
      }
      if (o) {
        obs.push_back(*o);
      } else {
        ++out.dropped_detections;
      }
    }
  }
  dropped_total_ += out.dropped_detections;
  if (out.dropped_detections > 0)
    spdlog::debug("t={}: dropped {} unlocalizable detection(s)", out.t_s, out.dropped_detections);

  out.update = tracker_.associate(fuse_observations(obs, params_.fusion_radius_m), out.t_s);
  out.entities = tracker_.entities();
  return out;
}

}  // namespace birdseye
