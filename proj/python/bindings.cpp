#include "birdseye/calibration.hpp"
#include "birdseye/engine.hpp"
#include "birdseye/error.hpp"
#include "birdseye/geometry.hpp"
#include "birdseye/io.hpp"
#include "birdseye/sensors.hpp"
#include "birdseye/simulator.hpp"
#include "birdseye/teach.hpp"

#include <pybind11/eigen.h>
#include <spdlog/spdlog.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace birdseye;

namespace {

py::dict fit_to_dict(const HomographyFit& fit) {
  py::dict d;
  d["matrix"] = Mat3(fit.homography.matrix());
  d["rms_px"] = fit.rms_px;
  d["rms_ground_m"] = fit.rms_ground_m;
  d["condition_ratio"] = fit.condition_ratio;
  d["ill_conditioned"] = fit.ill_conditioned;
  return d;
}

ViewCalibration view_calibration(const Mat3& h, const Vec3& camera_position) {
  return ViewCalibration{"", Homography(h), camera_position, 0.0};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bird's-eye interaction engine core";
  spdlog::set_level(spdlog::level::warn);
  m.def(
      "set_log_level", [](const std::string& level) { spdlog::set_level(spdlog::level::from_str(level)); },
      py::arg("level"));

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DegenerateError>(m, "DegenerateError", PyExc_RuntimeError);
  py::register_exception<HorizonError>(m, "HorizonError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<StreamError>(m, "StreamError", PyExc_RuntimeError);
  py::register_exception<TeachError>(m, "TeachError", PyExc_RuntimeError);
  py::register_exception<CommandError>(m, "CommandError", PyExc_RuntimeError);

  py::class_<PanoramicCamera>(m, "PanoramicCamera")
      .def(py::init<>())
      .def_readwrite("position_m", &PanoramicCamera::position_m)
      .def_readwrite("yaw_rad", &PanoramicCamera::yaw_rad)
      .def_readwrite("pano_width_px", &PanoramicCamera::pano_width_px)
      .def_readwrite("pano_height_px", &PanoramicCamera::pano_height_px)
      .def("world_from_camera", &PanoramicCamera::world_from_camera);

  py::class_<RectilinearView>(m, "RectilinearView")
      .def(py::init<>())
      .def_readwrite("id", &RectilinearView::id)
      .def_readwrite("pan_rad", &RectilinearView::pan_rad)
      .def_readwrite("tilt_rad", &RectilinearView::tilt_rad)
      .def_readwrite("hfov_rad", &RectilinearView::hfov_rad)
      .def_readwrite("width_px", &RectilinearView::width_px)
      .def_readwrite("height_px", &RectilinearView::height_px)
      .def("focal_px", &RectilinearView::focal_px);

  m.def("default_view_rig", &default_view_rig, py::arg("tilt_rad") = -0.9,
        py::arg("hfov_rad") = 1.5707963267948966, py::arg("width_px") = 1280, py::arg("height_px") = 960);
  m.def("pano_pixel_to_direction", &pano_pixel_to_direction, py::arg("camera"), py::arg("pixel"));
  m.def("direction_to_pano_pixel", &direction_to_pano_pixel, py::arg("camera"), py::arg("direction"));
  m.def("world_point_to_view_pixel", &world_point_to_view_pixel, py::arg("camera"), py::arg("view"),
        py::arg("point"));
  m.def("view_to_pano_pixel", &view_to_pano_pixel, py::arg("camera"), py::arg("view"), py::arg("pixel"));
  m.def("view_pixel_to_world_ray", &view_pixel_to_world_ray, py::arg("camera"), py::arg("view"),
        py::arg("pixel"));

  m.def(
      "estimate_homography",
      [](const std::vector<Vec2>& ground, const std::vector<Vec2>& pixels) {
        if (ground.size() != pixels.size()) throw DomainError("ground and pixel lists differ in length");
        std::vector<Correspondence> c;
        for (std::size_t i = 0; i < ground.size(); ++i) c.push_back({ground[i], pixels[i]});
        return fit_to_dict(estimate_homography(c));
      },
      py::arg("ground_m"), py::arg("pixels"));
  m.def(
      "lift_ground",
      [](const Mat3& h, const Vec2& pixel) { return lift_ground(view_calibration(h, Vec3(0, 0, 4)), pixel); },
      py::arg("h_ground_to_view"), py::arg("pixel"));
  m.def(
      "lift_at_height",
      [](const Mat3& h, const Vec3& camera_position, const Vec2& pixel, double height_m) {
        return lift_at_height(view_calibration(h, camera_position), pixel, height_m);
      },
      py::arg("h_ground_to_view"), py::arg("camera_position_m"), py::arg("pixel"), py::arg("height_m"));
  m.def(
      "keypoint_height",
      [](const std::string& name, double stature, double hip_ratio, double shoulder_ratio) {
        return keypoint_height(BodyModel{stature, hip_ratio, shoulder_ratio}, name);
      },
      py::arg("keypoint"), py::arg("stature_m") = 1.75, py::arg("hip_ratio") = 0.53,
      py::arg("shoulder_ratio") = 0.82);

  m.def(
      "point_in_polygon",
      [](const Vec2& p, const std::vector<Vec2>& poly) { return point_in_polygon(p, poly); }, py::arg("point"),
      py::arg("polygon"));
  m.def(
      "segment_crossing",
      [](const Vec2& prev, const Vec2& cur, const Vec2& a, const Vec2& b) {
        return segment_crossing(prev, cur, BarrierGeometry{a, b});
      },
      py::arg("prev"), py::arg("cur"), py::arg("a"), py::arg("b"));
  m.def(
      "proximity_level",
      [](double d, const std::vector<double>& levels, double hysteresis, int prev) {
        return proximity_level(d, levels, hysteresis, prev);
      },
      py::arg("distance_m"), py::arg("levels_m"), py::arg("hysteresis_m"), py::arg("prev_level"));

  m.def(
      "finalize_samples",
      [](const std::vector<Vec2>& samples, double epsilon) {
        const auto r = finalize_samples(samples, epsilon);
        return py::make_tuple(r.mat.polygon_m, r.hull_fallback);
      },
      py::arg("samples"), py::arg("epsilon_m") = 0.05);

  m.def(
      "simulate",
      [](const std::string& scenario_json, std::uint64_t seed) {
        const auto scenario = parse_scenario(Json::parse(scenario_json));
        std::ostringstream poses, truth;
        run_simulation(scenario, seed, poses, &truth);
        return py::make_tuple(poses.str(), truth.str());
      },
      py::arg("scenario_json"), py::arg("seed") = 0,
      "Returns (pose NDJSON, ground-truth NDJSON) for a scenario given as JSON text.");
  m.def(
      "calibrate_scene",
      [](const std::string& scenario_json) {
        return to_json(calibrate_scene(parse_scenario(Json::parse(scenario_json)))).dump();
      },
      py::arg("scenario_json"), "Calibration JSON fitted from the scenario's exact ground markers.");
  m.def(
      "replay",
      [](const std::string& calib_json, const std::string& sensors_json, const std::string& poses,
         const std::string& commands, bool strict) {
        Engine engine(parse_calibration(Json::parse(calib_json)),
                      parse_sensor_config(Json::parse(sensors_json)));
        ReplayOptions options;
        options.strict = strict;
        std::istringstream cmd_in(commands);
        options.commands = parse_command_trace(cmd_in);
        std::istringstream in(poses);
        std::ostringstream out;
        {
          py::gil_scoped_release release;
          replay(engine, in, options, [&](const FrameResult& r) {
            for (const auto& ev : r.events) out << dump_line(to_json(ev)) << '\n';
          });
        }
        return out.str();
      },
      py::arg("calibration_json"), py::arg("sensors_json"), py::arg("poses_ndjson"),
      py::arg("commands_ndjson") = "", py::arg("strict") = false,
      "Runs the engine over a pose stream and returns the event NDJSON.");
}
