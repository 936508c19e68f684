#pragma once

#include "birdseye/geometry.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace birdseye {

// Invertible ground(m) -> view(px) projective map, stored with unit Frobenius
// norm and a non-negative bottom-right entry.
class Homography {
 public:
  Homography() : Homography(Mat3::Identity()) {}
  // Normalizes `m`; throws DegenerateError when it is (numerically) singular.
  explicit Homography(const Mat3& m);

  const Mat3& matrix() const { return h_; }
  const Mat3& inverse() const { return inv_; }

  // Ground point to view pixel. Throws HorizonError for points at infinity.
  Vec2 to_pixel(const Vec2& ground_m) const;
  // Homogeneous ground-side image of a pixel, scaled so the map has unit norm.
  Vec3 back_project(const Vec2& pixel) const;

 private:
  Mat3 h_;
  Mat3 inv_;
  Mat3 inv_unit_;
};

struct Correspondence {
  Vec2 ground_m;
  Vec2 pixel;
};

struct HomographyFit {
  Homography homography;
  double rms_px = 0.0;        // forward (ground -> pixel) transfer error
  double rms_ground_m = 0.0;  // backward (pixel -> ground) transfer error
  double condition_ratio = 0.0;  // sigma_8 / sigma_9 of the design matrix
  bool ill_conditioned = false;
};

// Normalized DLT. Throws DegenerateError for n < 4 or rank-deficient input.
HomographyFit estimate_homography(std::span<const Correspondence> correspondences);

struct BodyModel {
  double stature_m = 1.75;
  double hip_ratio = 0.53;
  double shoulder_ratio = 0.82;
  static constexpr double ankle_ratio = 0.0;
  static constexpr double kMaxStature = 2.2;

  void validate() const;
};

enum class Side { left, right };
enum class Band { ankle, hip, shoulder };

struct BodyKeypoint {
  Band band;
  Side side;
};

std::optional<BodyKeypoint> parse_body_keypoint(std::string_view name);
std::string body_keypoint_name(Band band, Side side);

// Height above ground of a named human keypoint. Throws ConfigError for
// names outside the six-keypoint body model.
double keypoint_height(const BodyModel& model, std::string_view keypoint_name);
double band_height(const BodyModel& model, Band band);

struct ViewCalibration {
  std::string view_id;
  Homography ground_to_view;
  Vec3 camera_position_m{0.0, 0.0, 4.0};
  double rms_reprojection_px = 0.0;
};

// Pixel to ground-plane point through the inverse homography.
Vec2 lift_ground(const ViewCalibration& calib, const Vec2& pixel);

// True planimetric position of a point at height `h_m` whose ground-plane
// image is the pixel's lift. Scales about the camera nadir by (z_C - h) / z_C.
Vec2 lift_at_height(const ViewCalibration& calib, const Vec2& pixel, double h_m);

}  // namespace birdseye

namespace birdseye {

// Robot analogue of BodyModel: fixed keypoint heights per robot type.
struct RobotProfile {
  std::string name;
  std::map<std::string, double> keypoint_heights_m;
  std::string base_keypoint = "base";

  void validate() const;
};

// Everything the calibration file carries: one camera, its views and their
// ground homographies, plus the height models used for lifting.
struct SceneCalibration {
  PanoramicCamera camera;
  BodyModel body;
  std::vector<RobotProfile> robot_profiles;
  std::vector<RectilinearView> views;
  std::vector<ViewCalibration> view_calibrations;

  const ViewCalibration* find_calibration(std::string_view view_id) const;
  const RectilinearView* find_view(std::string_view view_id) const;
  void validate() const;
};

}  // namespace birdseye
