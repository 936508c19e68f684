#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace birdseye {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Equirectangular panoramic camera. World frame is x east, y north, z up.
// At yaw 0 the camera's forward axis (+z) points to world +y, camera +x to
// world +x and camera +y (down) to world -z.
struct PanoramicCamera {
  Vec3 position_m{0.0, 0.0, 4.0};
  double yaw_rad = 0.0;
  int pano_width_px = 3840;
  int pano_height_px = 1920;

  // Throws DomainError unless width == 2 * height and the camera is above ground.
  void validate() const;

  // Rotation taking camera-frame vectors to world-frame vectors.
  Mat3 world_from_camera() const;
};

// Pinhole view synthesized from the panorama. Pan rotates about the camera
// y axis, tilt about the camera x axis (negative tilt looks down).
struct RectilinearView {
  std::string id;
  double pan_rad = 0.0;
  double tilt_rad = 0.0;
  double hfov_rad = 1.5707963267948966;
  int width_px = 1280;
  int height_px = 960;

  void validate() const;
  double focal_px() const;
  // Rotation taking view-frame rays to camera-frame directions: R_y(pan) * R_x(tilt).
  Mat3 camera_from_view() const;
  bool contains(const Vec2& px, double margin_px = 0.0) const;
};

// Unit direction in the camera frame (x right, y down, z forward).
using Direction = Vec3;

Direction pano_pixel_to_direction(const PanoramicCamera& cam, const Vec2& px);
Vec2 direction_to_pano_pixel(const PanoramicCamera& cam, const Direction& d);

Direction view_pixel_to_direction(const RectilinearView& view, const Vec2& px);

// Returns std::nullopt when the point is behind the view (view-frame z <= 1e-9).
std::optional<Vec2> world_point_to_view_pixel(const PanoramicCamera& cam,
                                              const RectilinearView& view,
                                              const Vec3& p);

Vec2 view_to_pano_pixel(const PanoramicCamera& cam, const RectilinearView& view,
                        const Vec2& px);

// World-frame unit ray through a view pixel.
Vec3 view_pixel_to_world_ray(const PanoramicCamera& cam, const RectilinearView& view,
                             const Vec2& px);

// Four views with `hfov_rad` spaced evenly in pan, all at the same tilt.
std::vector<RectilinearView> default_view_rig(double tilt_rad = -0.9,
                                              double hfov_rad = 1.5707963267948966,
                                              int width_px = 1280, int height_px = 960);

}  // namespace birdseye
