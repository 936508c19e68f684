#include "birdseye/geometry.hpp"

#include "birdseye/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace birdseye {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBehindEps = 1e-9;

Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0.0, std::sin(a),
       0.0, 1.0, 0.0,
       -std::sin(a), 0.0, std::cos(a);
  return r;
}

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1.0, 0.0, 0.0,
       0.0, std::cos(a), -std::sin(a),
       0.0, std::sin(a), std::cos(a);
  return r;
}

}  // namespace

void PanoramicCamera::validate() const {
  if (pano_width_px <= 0 || pano_height_px <= 0)
    throw DomainError("panorama dimensions must be positive");
  if (pano_width_px != 2 * pano_height_px)
    throw DomainError("equirectangular panorama must have width == 2 * height");
  if (!(position_m.z() > 0.0))
    throw DomainError("camera must be strictly above the ground plane");
  if (!position_m.allFinite() || !std::isfinite(yaw_rad))
    throw DomainError("camera pose must be finite");
}

Mat3 PanoramicCamera::world_from_camera() const {
  Mat3 axes;
  // columns: camera x, y, z expressed in world coordinates at yaw 0
  axes << 1.0, 0.0, 0.0,
          0.0, 0.0, 1.0,
          0.0, -1.0, 0.0;
  return Eigen::AngleAxisd(yaw_rad, Vec3::UnitZ()).toRotationMatrix() * axes;
}

void RectilinearView::validate() const {
  if (width_px <= 0 || height_px <= 0)
    throw DomainError("view '" + id + "': dimensions must be positive");
  if (!(pan_rad >= -kPi && pan_rad < kPi))
    throw DomainError("view '" + id + "': pan must lie in [-pi, pi)");
  if (!(std::abs(tilt_rad) < kPi / 2))
    throw DomainError("view '" + id + "': tilt must lie in (-pi/2, pi/2)");
  if (!(hfov_rad > 0.0 && hfov_rad < kPi))
    throw DomainError("view '" + id + "': hfov must lie in (0, pi)");
  const double f = focal_px();
  if (!std::isfinite(f) || f <= 0.0)
    throw DomainError("view '" + id + "': focal length is not finite and positive");
}

double RectilinearView::focal_px() const {
  return (width_px / 2.0) / std::tan(hfov_rad / 2.0);
}

Mat3 RectilinearView::camera_from_view() const { return rot_y(pan_rad) * rot_x(tilt_rad); }

bool RectilinearView::contains(const Vec2& px, double margin_px) const {
  return px.x() >= -margin_px && px.x() < width_px + margin_px && px.y() >= -margin_px &&
         px.y() < height_px + margin_px;
}

Direction pano_pixel_to_direction(const PanoramicCamera& cam, const Vec2& px) {
  const double w = cam.pano_width_px;
  const double h = cam.pano_height_px;
  if (!(px.x() >= 0.0 && px.x() < w && px.y() >= 0.0 && px.y() <= h))
    throw DomainError("panorama pixel out of range");
  const double lon = (px.x() / w - 0.5) * 2.0 * kPi;
  const double lat = (0.5 - px.y() / h) * kPi;
  return {std::cos(lat) * std::sin(lon), -std::sin(lat), std::cos(lat) * std::cos(lon)};
}

Vec2 direction_to_pano_pixel(const PanoramicCamera& cam, const Direction& d) {
  const double n = d.norm();
  if (!(n > 1e-12)) throw DomainError("direction must be non-zero");
  if (std::abs(n - 1.0) > 1e-6) throw DomainError("direction must be a unit vector");
  const Vec3 u = d / n;
  const double horiz = std::hypot(u.x(), u.z());
  // longitude is 0 at the poles
  const double lon = horiz == 0.0 ? 0.0 : std::atan2(u.x(), u.z());
  const double lat = std::atan2(-u.y(), horiz);
  const double w = cam.pano_width_px;
  double col = (lon / (2.0 * kPi) + 0.5) * w;
  if (col >= w) col -= w;
  return {col, (0.5 - lat / kPi) * cam.pano_height_px};
}

Direction view_pixel_to_direction(const RectilinearView& view, const Vec2& px) {
  const Vec3 ray(px.x() - view.width_px / 2.0, px.y() - view.height_px / 2.0, view.focal_px());
  return view.camera_from_view() * ray.normalized();
}

std::optional<Vec2> world_point_to_view_pixel(const PanoramicCamera& cam,
                                              const RectilinearView& view, const Vec3& p) {
  const Vec3 rel = p - cam.position_m;
  if (!(rel.norm() > 1e-12)) throw DomainError("point coincides with the camera center");
  const Vec3 in_view =
      view.camera_from_view().transpose() * (cam.world_from_camera().transpose() * rel);
  if (in_view.z() <= kBehindEps) return std::nullopt;
  const double f = view.focal_px();
  return Vec2(f * in_view.x() / in_view.z() + view.width_px / 2.0,
              f * in_view.y() / in_view.z() + view.height_px / 2.0);
}

Vec2 view_to_pano_pixel(const PanoramicCamera& cam, const RectilinearView& view,
                        const Vec2& px) {
  return direction_to_pano_pixel(cam, view_pixel_to_direction(view, px));
}

Vec3 view_pixel_to_world_ray(const PanoramicCamera& cam, const RectilinearView& view,
                             const Vec2& px) {
  return cam.world_from_camera() * view_pixel_to_direction(view, px);
}

std::vector<RectilinearView> default_view_rig(double tilt_rad, double hfov_rad, int width_px,
                                              int height_px) {
  const double pans[] = {0.0, kPi / 2, -kPi, -kPi / 2};
  std::vector<RectilinearView> views;
  for (int i = 0; i < 4; ++i) {
    RectilinearView v;
    v.id = "v" + std::to_string(i);
    v.pan_rad = pans[i];
    v.tilt_rad = tilt_rad;
    v.hfov_rad = hfov_rad;
    v.width_px = width_px;
    v.height_px = height_px;
    views.push_back(v);
  }
  return views;
}

}  // namespace birdseye
