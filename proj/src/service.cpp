#include "birdseye/service.hpp"

#include "birdseye/engine.hpp"
#include "birdseye/error.hpp"
#include "birdseye/server.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

namespace birdseye {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

class Output {
 public:
  Output(Engine& engine, Server* server, std::ostream* out) : engine_(engine), server_(server), out_(out) {}

  void frame(const FrameResult& result) {
    std::vector<Json> events;
    for (const auto& ev : result.events) {
      const auto j = to_json(ev);
      if (out_) *out_ << dump_line(j) << '\n';
      events.push_back({{"type", "event"}, {"event", j}});
    }
    if (server_) server_->publish_frame(engine_.snapshot(), engine_.entities_message(result), events);
  }

  // Applies queued wire commands; each ack goes back to the issuing client.
  void drain_commands() {
    if (!server_) return;
    auto cmds = server_->take_commands();
    if (cmds.empty()) return;
    for (auto& c : cmds) {
      const auto ack = engine_.command(c.body);
      spdlog::info("command {} -> {}", c.body.value("cmd", "?"), ack.value("ok", false) ? "ok" : "rejected");
      server_->send(c.client, ack);
    }
    server_->set_snapshot(engine_.snapshot());
  }

 private:
  Engine& engine_;
  Server* server_;
  std::ostream* out_;
};

void run_listen(Engine& engine, Output& output, const ListenSource& src, bool strict,
                std::map<std::size_t, std::vector<Json>> trace) {
  PoseListener listener(src.port);
  spdlog::info("listening for poses on port {}", listener.port());
  FrameGrouper grouper;
  std::size_t frames = 0;
  auto run_group = [&](const std::vector<PoseFrame>& group) {
    if (const auto it = trace.find(frames); it != trace.end())
      for (const auto& c : it->second) engine.command(c);
    output.frame(engine.process(group));
    ++frames;
  };
  while (!g_stop) {
    output.drain_commands();
    const auto line = listener.next_line(std::chrono::milliseconds(250));
    if (!line) {
      // Idle or producer gone: the pending group is complete.
      if (auto group = grouper.flush()) run_group(*group);
      continue;
    }
    if (line->find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      if (auto group = grouper.push(parse_pose_line(*line))) run_group(*group);
    } catch (const StreamError& e) {
      if (strict) throw;
      spdlog::warn("{} (skipped)", e.what());
    }
    if (listener.take_disconnect())
      if (auto group = grouper.flush()) run_group(*group);
  }
  if (auto group = grouper.flush()) run_group(*group);
}

}  // namespace

void request_stop() { g_stop = true; }

int run_engine(const RuntimeConfig& config) {
  g_stop = false;
  spdlog::set_level(spdlog::level::from_str(config.log_level));

  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  struct RestoreSignals {
    decltype(prev_int) i, t;
    ~RestoreSignals() {
      std::signal(SIGINT, i);
      std::signal(SIGTERM, t);
    }
  } restore{prev_int, prev_term};

  try {
    auto calib = parse_calibration(read_json_file(config.calibration_path));
    SensorConfig sensors;
    if (config.sensors_path && std::filesystem::exists(*config.sensors_path))
      sensors = parse_sensor_config(read_json_file(*config.sensors_path));
    EngineOptions options;
    options.sensors_path = config.sensors_path;
    Engine engine(std::move(calib), std::move(sensors), options);

    std::map<std::size_t, std::vector<Json>> trace;
    if (config.commands_path) {
      std::ifstream in(*config.commands_path);
      if (!in) throw ConfigError("cannot open command trace " + config.commands_path->string());
      trace = parse_command_trace(in);
    }

    std::ofstream out_file;
    if (config.out_path) {
      out_file.open(*config.out_path);
      if (!out_file) throw ConfigError("cannot write " + config.out_path->string());
    }

    std::unique_ptr<Server> server;
    if (config.serve_port) {
      server = std::make_unique<Server>(*config.serve_port);
      server->set_snapshot(engine.snapshot());
      server->start();
    }
    Output output(engine, server.get(), config.out_path ? &out_file : nullptr);

    if (const auto* replay_src = std::get_if<ReplaySource>(&config.source)) {
      std::ifstream file;
      std::istream* in = &std::cin;
      if (replay_src->path != "-") {
        file.open(replay_src->path);
        if (!file) throw ConfigError("cannot open pose stream " + replay_src->path.string());
        in = &file;
      }
      ReplayOptions ro;
      ro.speed = replay_src->speed;
      ro.strict = config.strict;
      ro.commands = std::move(trace);
      ro.between_frames = [&] {
        output.drain_commands();
        return !g_stop.load();
      };
      const auto stats = replay(engine, *in, ro, [&](const FrameResult& r) { output.frame(r); });
      for (const auto& ack : stats.acks)
        if (!ack.value("ok", false)) spdlog::warn("trace command rejected: {}", ack.value("error", ""));
      spdlog::info("replayed {} lines, {} frames, {} events, {} skipped", stats.lines, stats.frames,
                   stats.events, stats.skipped_lines);
      if (config.hold && server) {
        spdlog::info("replay finished; serving until interrupted");
        while (!g_stop) {
          server->wait_for_commands(std::chrono::milliseconds(200));
          output.drain_commands();
        }
      }
    } else {
      run_listen(engine, output, std::get<ListenSource>(config.source), config.strict, std::move(trace));
    }

    out_file.flush();
    if (server) server->stop();
    return kExitOk;
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
}

}  // namespace birdseye
