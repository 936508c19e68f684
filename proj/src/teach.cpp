#include "birdseye/teach.hpp"

#include "birdseye/error.hpp"
#include "birdseye/polygon.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace birdseye {

namespace {

constexpr double kMinTeachArea = 0.05;
constexpr double kMinMatArea = 0.01;

void simplify_range(std::span<const Vec2> pts, std::size_t first, std::size_t last, double eps,
                    std::vector<bool>& keep) {
  if (last <= first + 1) return;
  double worst = -1.0;
  std::size_t idx = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = point_segment_distance(pts[i], pts[first], pts[last]);
    if (d > worst) {
      worst = d;
      idx = i;
    }
  }
  if (worst > eps) {
    keep[idx] = true;
    simplify_range(pts, first, idx, eps, keep);
    simplify_range(pts, idx, last, eps, keep);
  }
}

}  // namespace

TeachSession::TeachSession(std::string session_id, std::int64_t entity_id, double decimation_m)
    : session_id_(std::move(session_id)), entity_id_(entity_id), decimation_m_(decimation_m) {}

bool TeachSession::record(const EntityState& entity) {
  if (state_ == State::finished) throw TeachError("teach session is already finished");
  if (entity.entity_id != entity_id_) {
    spdlog::debug("teach: ignoring entity {} (recording {})", entity.entity_id, entity_id_);
    return false;
  }
  if (!samples_.empty() && (entity.position_m - samples_.back().position_m).norm() < decimation_m_)
    return false;
  samples_.push_back({entity.last_seen_s, entity.position_m});
  return true;
}

std::vector<Vec2> douglas_peucker(std::span<const Vec2> polyline, double epsilon_m) {
  if (polyline.size() <= 2) return {polyline.begin(), polyline.end()};
  std::vector<bool> keep(polyline.size(), false);
  keep.front() = keep.back() = true;
  simplify_range(polyline, 0, polyline.size() - 1, epsilon_m, keep);
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < polyline.size(); ++i)
    if (keep[i]) out.push_back(polyline[i]);
  return out;
}

TeachResult finalize_samples(std::span<const Vec2> samples, double epsilon_m) {
  if (samples.size() < 3) throw TeachError("teach needs at least 3 samples");
  const auto hull = convex_hull({samples.begin(), samples.end()});
  if (hull.size() < 3 || signed_area(hull) <= kMinTeachArea)
    throw TeachError("taught path does not enclose enough area");

  // Anchor the closed loop at the sample farthest from the centroid, which is a
  // hull vertex, and split it at the sample farthest from that anchor.
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : samples) centroid += p;
  centroid /= static_cast<double>(samples.size());
  const auto far_it = std::max_element(samples.begin(), samples.end(), [&](const Vec2& a, const Vec2& b) {
    return (a - centroid).squaredNorm() < (b - centroid).squaredNorm();
  });
  const auto anchor = static_cast<std::size_t>(far_it - samples.begin());

  std::vector<Vec2> loop;
  for (std::size_t i = 0; i < samples.size(); ++i) loop.push_back(samples[(anchor + i) % samples.size()]);
  loop.push_back(loop.front());

  std::size_t split = 1;
  for (std::size_t i = 1; i + 1 < loop.size(); ++i)
    if ((loop[i] - loop[0]).squaredNorm() > (loop[split] - loop[0]).squaredNorm()) split = i;

  const std::span<const Vec2> all(loop);
  auto first = douglas_peucker(all.subspan(0, split + 1), epsilon_m);
  const auto second = douglas_peucker(all.subspan(split), epsilon_m);
  first.insert(first.end(), second.begin() + 1, second.end() - 1);

  TeachResult result;
  if (first.size() >= 3 && is_simple_polygon(first) && std::abs(signed_area(first)) > kMinMatArea) {
    if (signed_area(first) < 0.0) std::reverse(first.begin(), first.end());
    result.mat.polygon_m = std::move(first);
  } else {
    spdlog::warn("taught loop self-intersects; using the convex hull of {} samples", samples.size());
    result.mat.polygon_m = hull;
    result.hull_fallback = true;
  }
  return result;
}

TeachResult finalize(TeachSession& session, double epsilon_m) {
  if (session.state() == TeachSession::State::finished)
    throw TeachError("teach session is already finished");
  session.finish();
  std::vector<Vec2> pts;
  for (const auto& s : session.samples()) pts.push_back(s.position_m);
  return finalize_samples(pts, epsilon_m);
}

}  // namespace birdseye
