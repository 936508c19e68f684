#include "birdseye/calibration.hpp"

#include "birdseye/error.hpp"

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <cmath>
#include <vector>

namespace birdseye {

namespace {

constexpr double kHorizonEps = 1e-9;

Mat3 unit_frobenius(const Mat3& m) {
  Mat3 out = m / m.norm();
  double pivot = out(2, 2);
  if (std::abs(pivot) < 1e-12) {
    pivot = 0.0;
    for (int c = 0; c < 3; ++c) {
      if (std::abs(out(2, c)) >= 1e-12) {
        pivot = out(2, c);
        break;
      }
    }
  }
  if (pivot < 0.0) out = -out;
  return out;
}

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 hartley_transform(const std::vector<Vec2>& pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) throw DegenerateError("all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(),
       0.0, s, -s * centroid.y(),
       0.0, 0.0, 1.0;
  return t;
}

Vec2 apply(const Mat3& t, const Vec2& p) {
  const Vec3 q = t * p.homogeneous();
  return q.hnormalized();
}

bool any_three_collinear(const std::vector<Vec2>& pts) {
  const auto n = pts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const Vec2 a = pts[j] - pts[i];
        const Vec2 b = pts[k] - pts[i];
        if (std::abs(a.x() * b.y() - a.y() * b.x()) < 1e-9) return true;
      }
  return false;
}

}  // namespace

Homography::Homography(const Mat3& m) {
  if (!m.allFinite() || !(m.norm() > 0.0)) throw DegenerateError("homography is not finite");
  h_ = unit_frobenius(m);
  if (!(std::abs(h_.determinant()) > 1e-12)) throw DegenerateError("homography is singular");
  inv_ = h_.inverse();
  inv_unit_ = inv_ / inv_.norm();
}

Vec2 Homography::to_pixel(const Vec2& ground_m) const {
  const Vec3 q = h_ * ground_m.homogeneous();
  if (std::abs(q.z()) <= kHorizonEps) throw HorizonError("ground point maps to infinity");
  return q.hnormalized();
}

Vec3 Homography::back_project(const Vec2& pixel) const { return inv_unit_ * pixel.homogeneous(); }

HomographyFit estimate_homography(std::span<const Correspondence> correspondences) {
  const auto n = correspondences.size();
  if (n < 4) throw DegenerateError("at least 4 correspondences are required");

  std::vector<Vec2> ground;
  std::vector<Vec2> pixels;
  for (const auto& c : correspondences) {
    if (!c.ground_m.allFinite() || !c.pixel.allFinite())
      throw DegenerateError("correspondence contains non-finite values");
    ground.push_back(c.ground_m);
    pixels.push_back(c.pixel);
  }

  const Mat3 tg = hartley_transform(ground);
  const Mat3 tp = hartley_transform(pixels);
  std::vector<Vec2> gn, pn;
  for (std::size_t i = 0; i < n; ++i) {
    gn.push_back(apply(tg, ground[i]));
    pn.push_back(apply(tp, pixels[i]));
  }
  if (n == 4 && any_three_collinear(gn))
    throw DegenerateError("three of four ground points are collinear");

  // zero-padded to at least 9 rows so the full spectrum is available
  const Eigen::Index rows = std::max<Eigen::Index>(2 * static_cast<Eigen::Index>(n), 9);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = gn[i].x(), y = gn[i].y();
    const double u = pn[i].x(), v = pn[i].y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(r + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  if (!(sigma(7) > 1e-10 * sigma(0)))
    throw DegenerateError("correspondences are rank deficient (rank < 8)");

  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  HomographyFit fit;
  fit.homography = Homography(tp.inverse() * hn * tg);
  fit.condition_ratio = sigma(8) > 0.0 ? sigma(7) / sigma(8)
                                       : std::numeric_limits<double>::infinity();
  fit.ill_conditioned = fit.condition_ratio < 1e3;
  if (fit.ill_conditioned)
    spdlog::warn("homography estimate is ill-conditioned (sigma8/sigma9 = {:.3g})",
                 fit.condition_ratio);

  double fwd = 0.0, bwd = 0.0;
  const Mat3& hm = fit.homography.matrix();
  const Mat3& hi = fit.homography.inverse();
  for (std::size_t i = 0; i < n; ++i) {
    fwd += (apply(hm, ground[i]) - pixels[i]).squaredNorm();
    bwd += (apply(hi, pixels[i]) - ground[i]).squaredNorm();
  }
  fit.rms_px = std::sqrt(fwd / static_cast<double>(n));
  fit.rms_ground_m = std::sqrt(bwd / static_cast<double>(n));
  return fit;
}

void BodyModel::validate() const {
  if (!(stature_m >= 1.0 && stature_m <= kMaxStature))
    throw ConfigError("stature_m must lie in [1.0, 2.2]");
  if (!(ankle_ratio < hip_ratio && hip_ratio < shoulder_ratio && shoulder_ratio < 1.0))
    throw ConfigError("body ratios must satisfy 0 < hip_ratio < shoulder_ratio < 1");
}

std::optional<BodyKeypoint> parse_body_keypoint(std::string_view name) {
  Side side;
  if (name.starts_with("left_")) {
    side = Side::left;
    name.remove_prefix(5);
  } else if (name.starts_with("right_")) {
    side = Side::right;
    name.remove_prefix(6);
  } else {
    return std::nullopt;
  }
  if (name == "ankle") return BodyKeypoint{Band::ankle, side};
  if (name == "hip") return BodyKeypoint{Band::hip, side};
  if (name == "shoulder") return BodyKeypoint{Band::shoulder, side};
  return std::nullopt;
}

std::string body_keypoint_name(Band band, Side side) {
  std::string out = side == Side::left ? "left_" : "right_";
  switch (band) {
    case Band::ankle: return out + "ankle";
    case Band::hip: return out + "hip";
    case Band::shoulder: return out + "shoulder";
  }
  return out;
}

double band_height(const BodyModel& model, Band band) {
  switch (band) {
    case Band::ankle: return model.stature_m * BodyModel::ankle_ratio;
    case Band::hip: return model.stature_m * model.hip_ratio;
    case Band::shoulder: return model.stature_m * model.shoulder_ratio;
  }
  return 0.0;
}

double keypoint_height(const BodyModel& model, std::string_view keypoint_name) {
  const auto kp = parse_body_keypoint(keypoint_name);
  if (!kp) throw ConfigError("unknown body keypoint '" + std::string(keypoint_name) + "'");
  return band_height(model, kp->band);
}

Vec2 lift_ground(const ViewCalibration& calib, const Vec2& pixel) {
  const Vec3 q = calib.ground_to_view.back_project(pixel);
  if (std::abs(q.z()) <= kHorizonEps) throw HorizonError("pixel lies on the horizon line");
  return q.hnormalized();
}

Vec2 lift_at_height(const ViewCalibration& calib, const Vec2& pixel, double h_m) {
  const double zc = calib.camera_position_m.z();
  if (!(h_m >= 0.0 && h_m < zc))
    throw DomainError("lift height must lie in [0, camera height)");
  const Vec2 g = lift_ground(calib, pixel);
  const Vec2 nadir = calib.camera_position_m.head<2>();
  return nadir + (g - nadir) * ((zc - h_m) / zc);
}

}  // namespace birdseye

namespace birdseye {

void RobotProfile::validate() const {
  if (name.empty()) throw ConfigError("robot profile needs a name");
  if (!keypoint_heights_m.contains(base_keypoint))
    throw ConfigError("robot profile '" + name + "': base keypoint has no height");
  for (const auto& [kp, h] : keypoint_heights_m)
    if (!(h >= 0.0) || !std::isfinite(h))
      throw ConfigError("robot profile '" + name + "': invalid height for " + kp);
}

const ViewCalibration* SceneCalibration::find_calibration(std::string_view view_id) const {
  for (const auto& c : view_calibrations)
    if (c.view_id == view_id) return &c;
  return nullptr;
}

const RectilinearView* SceneCalibration::find_view(std::string_view view_id) const {
  for (const auto& v : views)
    if (v.id == view_id) return &v;
  return nullptr;
}

void SceneCalibration::validate() const {
  camera.validate();
  body.validate();
  double max_height = BodyModel::kMaxStature * body.shoulder_ratio;
  for (const auto& r : robot_profiles) {
    r.validate();
    for (const auto& [kp, h] : r.keypoint_heights_m) max_height = std::max(max_height, h);
  }
  for (const auto& v : views) v.validate();
  if (!(camera.position_m.z() > max_height))
    throw ConfigError("camera must be higher than every lifted keypoint");
  for (const auto& c : view_calibrations) {
    if (!find_view(c.view_id))
      throw ConfigError("calibration for unknown view '" + c.view_id + "'");
    if (!(c.camera_position_m.z() > max_height))
      throw ConfigError("camera must be higher than every lifted keypoint");
  }
}

}  // namespace birdseye
