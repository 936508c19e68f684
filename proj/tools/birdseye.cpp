// birdseye command line: simulate, calibrate, run, ctl.
#include "birdseye/calibration.hpp"
#include "birdseye/error.hpp"
#include "birdseye/io.hpp"
#include "birdseye/server.hpp"
#include "birdseye/service.hpp"
#include "birdseye/simulator.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

using namespace birdseye;

namespace {

std::vector<CorrespondenceSet> load_point_sets(const std::string& path) {
  const auto j = read_json_file(path);
  std::vector<CorrespondenceSet> out;
  if (j.is_array()) {
    for (const auto& s : j) out.push_back(parse_correspondences(s));
  } else {
    out.push_back(parse_correspondences(j));
  }
  return out;
}

int cmd_simulate(const std::string& scenario_path, std::uint64_t seed, const std::string& out,
                 const std::string& truth, const std::string& calib_out, const std::string& points_out) {
  const auto scenario = parse_scenario(read_json_file(scenario_path));
  std::ofstream poses(out);
  if (!poses) throw ConfigError("cannot write " + out);
  std::ofstream truth_file;
  if (!truth.empty()) {
    truth_file.open(truth);
    if (!truth_file) throw ConfigError("cannot write " + truth);
  }
  const auto stats = run_simulation(scenario, seed, poses, truth.empty() ? nullptr : &truth_file);
  spdlog::info("simulated {} frames ({} pose lines)", stats.frames, stats.pose_lines);
  if (!calib_out.empty()) {
    const auto calib = calibrate_scene(scenario);
    write_json_file(calib_out, to_json(calib));
    spdlog::info("calibration written to {}", calib_out);
  }
  if (!points_out.empty()) {
    Json sets = Json::array();
    for (const auto& view : scenario.views)
      sets.push_back(to_json(CorrespondenceSet{view.id, ground_markers(scenario.camera, view)}));
    write_json_file(points_out, sets);
  }
  return kExitOk;
}

int cmd_calibrate(const std::vector<std::string>& points, const std::string& base, const std::string& out) {
  auto calib = parse_calibration(read_json_file(base));
  for (const auto& path : points) {
    for (const auto& set : load_point_sets(path)) {
      if (!calib.find_view(set.view_id)) throw ConfigError("points for unknown view '" + set.view_id + "'");
      const auto fit = estimate_homography(set.points);
      if (fit.ill_conditioned)
        spdlog::warn("view {}: ill-conditioned fit (singular value ratio {:.3g})", set.view_id, fit.condition_ratio);
      spdlog::info("view {}: {} points, rms {:.4f} px, {:.4f} m", set.view_id, set.points.size(), fit.rms_px,
                   fit.rms_ground_m);
      ViewCalibration vc{set.view_id, fit.homography, calib.camera.position_m, fit.rms_px};
      auto it = std::find_if(calib.view_calibrations.begin(), calib.view_calibrations.end(),
                             [&](const ViewCalibration& c) { return c.view_id == set.view_id; });
      if (it != calib.view_calibrations.end()) {
        *it = vc;
      } else {
        calib.view_calibrations.push_back(vc);
      }
    }
  }
  calib.validate();
  write_json_file(out, to_json(calib));
  return kExitOk;
}

int print_ack(const Json& ack) {
  std::cout << ack.dump(2) << '\n';
  return ack.value("ok", false) ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("birdseye"));

  CLI::App app{"Bird's-eye interaction engine"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Render a scenario into pose and ground-truth streams");
  std::string scenario_path, sim_out, sim_truth, calib_out, points_out;
  std::uint64_t seed = 0;
  sim->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Noise seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Pose NDJSON output")->required();
  sim->add_option("--truth", sim_truth, "Ground truth NDJSON output");
  sim->add_option("--calib-out", calib_out, "Write the calibration fitted from simulated ground markers");
  sim->add_option("--points-out", points_out, "Write the ground marker correspondences per view");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit per-view homographies from ground correspondences");
  std::vector<std::string> points;
  std::string base, cal_out;
  cal->add_option("--points", points, "Correspondence JSON (one set or an array of sets)")
      ->required()
      ->check(CLI::ExistingFile);
  cal->add_option("--base", base, "Calibration JSON providing camera, views and body model")
      ->required()
      ->check(CLI::ExistingFile);
  cal->add_option("--out", cal_out, "Calibration JSON output")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the engine on a pose stream");
  RuntimeConfig rc;
  std::string calib_path, sensors_path, poses_path, out_path, commands_path;
  std::uint16_t listen_port = 0, serve_port = 0;
  double speed = 0.0;
  run->add_option("--calib", calib_path, "Calibration JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--sensors", sensors_path, "Sensor config JSON (also the save target)");
  auto* poses_opt = run->add_option("--poses", poses_path, "Pose NDJSON to replay ('-' for stdin)");
  auto* listen_opt = run->add_option("--listen", listen_port, "Accept pose streams on this TCP port");
  poses_opt->excludes(listen_opt);
  run->add_option("--speed", speed, "Replay pacing factor; 0 runs as fast as possible")->capture_default_str();
  run->add_option("--out", out_path, "Event NDJSON output");
  auto* serve_opt = run->add_option("--serve", serve_port, "Publish on this port (WebSocket or plain TCP)");
  run->add_option("--commands", commands_path, "Command trace NDJSON ({\"frame\": N, \"cmd\": ...})")
      ->check(CLI::ExistingFile);
  run->add_flag("--strict", rc.strict, "Abort on malformed pose lines");
  run->add_flag("--hold", rc.hold, "Keep serving after the replay ends")->needs(serve_opt);

  // ctl
  auto* ctl = app.add_subcommand("ctl", "Send an operator command to a running engine");
  ctl->require_subcommand(1);
  std::string host = "127.0.0.1";
  std::uint16_t ctl_port = 8080;
  ctl->add_option("--host", host)->capture_default_str();
  ctl->add_option("--port", ctl_port)->capture_default_str();
  Json cmd;
  std::string sensor_id, sensor_json, save_path;
  std::int64_t entity = 0;
  std::vector<std::string> classes;
  double epsilon = 0.0;
  for (const char* name : {"arm", "disarm", "remove"}) {
    auto* sc = ctl->add_subcommand(name, std::string(name) + " a sensor");
    sc->add_option("sensor_id", sensor_id)->required();
  }
  auto* add = ctl->add_subcommand("add", "Add a sensor");
  add->add_option("sensor", sensor_json, "Sensor JSON text or a path to a JSON file")->required();
  auto* teach = ctl->add_subcommand("teach", "Teach a mat by demonstration");
  teach->require_subcommand(1);
  auto* teach_start = teach->add_subcommand("start", "Start recording an entity");
  teach_start->add_option("--entity", entity)->required();
  auto* teach_stop = teach->add_subcommand("stop", "Finish recording and create the mat");
  teach_stop->add_option("--sensor-id", sensor_id)->required();
  teach_stop->add_option("--classes", classes);
  auto* eps_opt = teach_stop->add_option("--epsilon", epsilon, "Simplification tolerance in meters");
  auto* save = ctl->add_subcommand("save", "Persist the sensor set");
  save->add_option("--path", save_path);
  ctl->add_subcommand("snapshot", "Print the engine snapshot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // --help and --version are successes; every other usage error is a configuration error.
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*sim) return cmd_simulate(scenario_path, seed, sim_out, sim_truth, calib_out, points_out);
    if (*cal) return cmd_calibrate(points, base, cal_out);
    if (*run) {
      if (poses_opt->count() == listen_opt->count()) {
        std::cerr << "run: exactly one of --poses or --listen is required\n";
        return kExitConfig;
      }
      rc.calibration_path = calib_path;
      if (!sensors_path.empty()) rc.sensors_path = sensors_path;
      if (poses_opt->count()) {
        rc.source = ReplaySource{poses_path, speed};
      } else {
        rc.source = ListenSource{listen_port};
      }
      if (serve_opt->count()) rc.serve_port = serve_port;
      if (!out_path.empty()) rc.out_path = out_path;
      if (!commands_path.empty()) rc.commands_path = commands_path;
      rc.log_level = log_level;
      return run_engine(rc);
    }
    if (*ctl) {
      for (const char* name : {"arm", "disarm"})
        if (ctl->got_subcommand(name)) cmd = {{"cmd", name}, {"sensor_id", sensor_id}};
      if (ctl->got_subcommand("remove")) cmd = {{"cmd", "remove_sensor"}, {"sensor_id", sensor_id}};
      if (*add) {
        const auto sensor = std::filesystem::exists(sensor_json) ? read_json_file(sensor_json) : Json::parse(sensor_json);
        cmd = {{"cmd", "add_sensor"}, {"sensor", sensor}};
      }
      if (*teach_start) cmd = {{"cmd", "teach_start"}, {"entity", entity}};
      if (*teach_stop) {
        cmd = {{"cmd", "teach_stop"}, {"sensor_id", sensor_id}};
        if (!classes.empty()) cmd["classes"] = classes;
        if (eps_opt->count()) cmd["epsilon_m"] = epsilon;
      }
      if (*save) {
        cmd = {{"cmd", "save"}};
        if (!save_path.empty()) cmd["path"] = save_path;
      }
      if (ctl->got_subcommand("snapshot")) cmd = {{"cmd", "snapshot"}};
      return print_ack(send_command(host, ctl_port, cmd));
    }
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const StreamError& e) {
    spdlog::error("stream error: {}", e.what());
    return kExitStream;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitOk;
}
