#pragma once

#include "birdseye/calibration.hpp"
#include "birdseye/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <random>
#include <vector>

namespace birdseye::testing {

inline constexpr double kPi = 3.14159265358979323846;

// Projective map applied by hand, independent of Homography.
inline Vec2 apply_h(const Mat3& h, const Vec2& p) {
  const double x = h(0, 0) * p.x() + h(0, 1) * p.y() + h(0, 2);
  const double y = h(1, 0) * p.x() + h(1, 1) * p.y() + h(1, 2);
  const double w = h(2, 0) * p.x() + h(2, 1) * p.y() + h(2, 2);
  return {x / w, y / w};
}

// Relative Frobenius distance after scaling both to unit norm and aligning sign.
inline double relative_h_error(const Mat3& estimate, const Mat3& truth) {
  const Mat3 a = estimate / estimate.norm();
  Mat3 b = truth / truth.norm();
  if ((a - b).norm() > (a + b).norm()) b = -b;
  return (a - b).norm();
}

// A random homography from a pinhole camera looking down at the ground, so the
// sampled ground patch stays well in front of it.
inline Mat3 random_ground_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double f = 400.0 + 600.0 * (0.5 + 0.5 * u(rng));
  Mat3 k;
  k << f, 0.2 * u(rng) * f * 0.01, 640 + 100 * u(rng), 0, f * (1.0 + 0.05 * u(rng)), 480 + 100 * u(rng), 0, 0, 1;
  const double yaw = kPi * u(rng);
  const double tilt = 0.3 + 0.8 * (0.5 + 0.5 * u(rng));
  const Vec3 z_c(std::cos(yaw) * std::cos(tilt), std::sin(yaw) * std::cos(tilt), -std::sin(tilt));
  const Vec3 x_c = z_c.cross(Vec3::UnitZ()).normalized();
  const Vec3 y_c = z_c.cross(x_c);
  Mat3 r;
  r.row(0) = x_c;
  r.row(1) = y_c;
  r.row(2) = z_c;
  const Vec3 c(2.0 * u(rng), 2.0 * u(rng), 3.0 + 2.0 * (0.5 + 0.5 * u(rng)));
  const Vec3 t = -r * c;
  Mat3 rt;
  rt.col(0) = r.col(0);
  rt.col(1) = r.col(1);
  rt.col(2) = t;
  return k * rt;
}

// Ground points in front of the camera described by `h` (positive depth).
inline std::vector<Vec2> ground_points_in_front(const Mat3& h, std::size_t n, std::mt19937_64& rng,
                                                double extent = 4.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec2> out;
  while (out.size() < n) {
    const Vec2 g(u(rng), u(rng));
    const double w = h(2, 0) * g.x() + h(2, 1) * g.y() + h(2, 2);
    if (w > 0.5) out.push_back(g);
  }
  return out;
}

// Ground points that project inside a width x height image; empty when the
// camera sees too little of the sampled ground patch.
inline std::vector<Vec2> ground_points_in_image(const Mat3& h, std::size_t n, std::mt19937_64& rng,
                                                double width = 1280, double height = 960,
                                                double extent = 8.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec2> out;
  for (int tries = 0; out.size() < n && tries < 200000; ++tries) {
    const Vec2 g(u(rng), u(rng));
    const Vec3 p = h * Vec3(g.x(), g.y(), 1.0);
    if (p.z() <= 0.5) continue;
    const Vec2 px = p.head<2>() / p.z();
    if (px.x() >= 0 && px.x() <= width && px.y() >= 0 && px.y() <= height) out.push_back(g);
  }
  if (out.size() < n) out.clear();
  return out;
}

// World-from-camera rotation built directly from the axis convention.
inline Mat3 world_from_camera_oracle(double yaw) {
  Mat3 base;
  base << 1, 0, 0, 0, 0, 1, 0, -1, 0;
  Mat3 rz;
  rz << std::cos(yaw), -std::sin(yaw), 0, std::sin(yaw), std::cos(yaw), 0, 0, 0, 1;
  return rz * base;
}

inline Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

inline Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

}  // namespace birdseye::testing
