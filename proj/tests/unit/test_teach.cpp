#include "birdseye/error.hpp"
#include "birdseye/polygon.hpp"
#include "birdseye/teach.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace birdseye;
using namespace birdseye::testing;

namespace {

EntityState at(std::int64_t id, double x, double y, double t = 0.0) {
  EntityState e;
  e.entity_id = id;
  e.position_m = {x, y};
  e.last_seen_s = t;
  return e;
}

// Proper or touching intersection between non-adjacent edges of a closed path.
bool path_self_intersects(const std::vector<Vec2>& p) {
  const auto n = p.size();
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    return (v > 1e-12) - (v < -1e-12);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const Vec2 &a = p[i], &b = p[(i + 1) % n], &c = p[j], &d = p[(j + 1) % n];
      if (orient(a, b, c) * orient(a, b, d) < 0 && orient(c, d, a) * orient(c, d, b) < 0) return true;
    }
  return false;
}

double distance_to_closed(const Vec2& q, const std::vector<Vec2>& poly) {
  double best = 1e300;
  for (std::size_t i = 0; i < poly.size(); ++i)
    best = std::min(best, point_segment_distance(q, poly[i], poly[(i + 1) % poly.size()]));
  return best;
}

}  // namespace

TEST_SUITE("teach") {

TEST_CASE("decimation of a stationary entity") {
  TeachSession s("t1", 5);
  int added = 0;
  for (int k = 0; k < 100; ++k) added += s.record(at(5, 1.0 + 1e-4 * (k % 3), 2.0, k / 30.0));
  CHECK(added == 1);
  CHECK(s.samples().size() == 1);
}

TEST_CASE("sample count along a 4 m square is bounded by perimeter over decimation") {
  TeachSession s("t1", 1);
  const double step = 0.013;
  const std::vector<Vec2> corners{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {0, 0}};
  int k = 0;
  for (std::size_t c = 0; c + 1 < corners.size(); ++c) {
    const auto n = static_cast<int>(4.0 / step);
    for (int i = 0; i < n; ++i) {
      const Vec2 p = corners[c] + (corners[c + 1] - corners[c]) * (static_cast<double>(i) / n);
      s.record(at(1, p.x(), p.y(), k++ / 30.0));
    }
  }
  CHECK(s.samples().size() <= static_cast<std::size_t>(16.0 / 0.02) + 1);
  CHECK(s.samples().size() > 100);
  for (std::size_t i = 1; i < s.samples().size(); ++i) {
    CHECK((s.samples()[i].position_m - s.samples()[i - 1].position_m).norm() >= 0.02);
    CHECK(s.samples()[i].t_s > s.samples()[i - 1].t_s);
  }
}

TEST_CASE("other entities are ignored and finished sessions refuse samples") {
  TeachSession s("t1", 1);
  CHECK_FALSE(s.record(at(2, 0, 0)));
  CHECK(s.samples().empty());
  s.record(at(1, 0, 0));
  s.record(at(1, 1, 0));
  s.record(at(1, 1, 1));
  s.record(at(1, 0, 1));
  const auto r = finalize(s);
  CHECK(s.state() == TeachSession::State::finished);
  CHECK(r.mat.polygon_m.size() == 4);
  CHECK_THROWS_AS(s.record(at(1, 5, 5)), TeachError);
  CHECK_THROWS_AS(finalize(s), TeachError);
}

TEST_CASE("collinear intermediate samples collapse to the unit square") {
  std::vector<Vec2> samples;
  const std::vector<Vec2> corners{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (std::size_t c = 0; c < 4; ++c)
    for (int i = 0; i < 10; ++i) samples.push_back(corners[c] + (corners[(c + 1) % 4] - corners[c]) * (i / 10.0));
  const auto r = finalize_samples(samples);
  CHECK_FALSE(r.hull_fallback);
  REQUIRE(r.mat.polygon_m.size() == 4);
  for (const auto& c : corners) {
    const bool found = std::any_of(r.mat.polygon_m.begin(), r.mat.polygon_m.end(),
                                   [&](const Vec2& v) { return (v - c).norm() < 1e-12; });
    CHECK(found);
  }
  CHECK(signed_area(r.mat.polygon_m) == doctest::Approx(1.0));
}

TEST_CASE("a straight trace has no area") {
  std::vector<Vec2> line;
  for (int i = 0; i <= 100; ++i) line.push_back({0.02 * i, 0.0});
  CHECK_THROWS_AS(finalize_samples(line), TeachError);
  CHECK_THROWS_AS(finalize_samples(std::vector<Vec2>{{0, 0}, {1, 1}}), TeachError);
}

TEST_CASE("figure eight falls back to the convex hull") {
  std::vector<Vec2> eight;
  for (int i = 0; i < 200; ++i) {
    const double a = 2 * kPi * (i + 0.5) / 200;
    eight.push_back({std::sin(a), 0.5 * std::sin(2 * a)});
  }
  REQUIRE(path_self_intersects(eight));
  const auto r = finalize_samples(eight);
  CHECK(r.hull_fallback);
  const auto& poly = r.mat.polygon_m;
  CHECK(is_simple_polygon(poly));
  CHECK(signed_area(poly) > 0.0);
  // Hull oracle: every sample on the inner side of every edge.
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 e = poly[(i + 1) % poly.size()] - poly[i];
    for (const auto& q : eight) CHECK(e.x() * (q - poly[i]).y() - e.y() * (q - poly[i]).x() >= -1e-12);
  }
}

TEST_CASE("finalized loops keep every sample within epsilon") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec2> loop;
    const double lobes = 2 + trial % 4;
    for (int i = 0; i < 300; ++i) {
      const double a = 2 * kPi * i / 300;
      const double r = 1.5 + 0.4 * std::cos(lobes * a);
      loop.push_back({r * std::cos(a) + jitter(rng), r * std::sin(a) + jitter(rng)});
    }
    if (trial % 2) std::reverse(loop.begin(), loop.end());
    const auto res = finalize_samples(loop, 0.05);
    REQUIRE_FALSE(res.hull_fallback);
    CHECK(is_simple_polygon(res.mat.polygon_m));
    CHECK(signed_area(res.mat.polygon_m) > 0.01);
    double worst = 0.0;
    for (const auto& q : loop) worst = std::max(worst, distance_to_closed(q, res.mat.polygon_m));
    CHECK(worst <= 0.05 + 1e-12);
  }
}

TEST_CASE("open Douglas-Peucker keeps endpoints and significant bends") {
  const std::vector<Vec2> slight{{0, 0}, {1, 0.01}, {2, 0}};
  CHECK(douglas_peucker(slight, 0.05).size() == 2);
  const std::vector<Vec2> bend{{0, 0}, {1, 0.1}, {2, 0}};
  CHECK(douglas_peucker(bend, 0.05).size() == 3);
}

}
