#pragma once

#include "birdseye/pipeline.hpp"
#include "birdseye/sensors.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace birdseye {

struct TeachSample {
  double t_s = 0.0;
  Vec2 position_m = Vec2::Zero();
};

// Records one entity's ground trajectory while an operator demonstrates a region.
class TeachSession {
 public:
  enum class State { recording, finished };

  TeachSession(std::string session_id, std::int64_t entity_id, double decimation_m = 0.02);

  // Appends the entity position if it moved at least the decimation distance.
  // States of other entities are ignored. Throws TeachError once finished.
  bool record(const EntityState& entity);
  void finish() { state_ = State::finished; }

  const std::string& session_id() const { return session_id_; }
  std::int64_t entity_id() const { return entity_id_; }
  State state() const { return state_; }
  const std::vector<TeachSample>& samples() const { return samples_; }

 private:
  std::string session_id_;
  std::int64_t entity_id_;
  double decimation_m_;
  State state_ = State::recording;
  std::vector<TeachSample> samples_;
};

struct TeachResult {
  MatGeometry mat;
  bool hull_fallback = false;
};

// Open-polyline Douglas-Peucker; keeps both endpoints.
std::vector<Vec2> douglas_peucker(std::span<const Vec2> polyline, double epsilon_m);

// Closes the recorded loop, simplifies it and returns a counter-clockwise mat.
// Falls back to the convex hull of all samples if the simplified loop self-intersects.
// Throws TeachError for fewer than 3 samples or a hull area <= 0.05 m^2.
TeachResult finalize(TeachSession& session, double epsilon_m = 0.05);
TeachResult finalize_samples(std::span<const Vec2> samples, double epsilon_m = 0.05);

}  // namespace birdseye
