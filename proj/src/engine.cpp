#include "birdseye/engine.hpp"

#include "birdseye/error.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <string>
#include <thread>

namespace birdseye {

Engine::Engine(SceneCalibration calibration, SensorConfig sensors, EngineOptions options)
    : pipeline_(std::move(calibration), options.params),
      bindings_(std::move(sensors.reactions)),
      options_(std::move(options)) {
  for (auto& s : sensors.sensors) sensors_.add(std::move(s));
  for (const auto& b : bindings_)
    if (!sensors_.find(b.sensor_id))
      throw ConfigError("reaction references unknown sensor '" + b.sensor_id + "'");
}

FrameResult Engine::process(const std::vector<PoseFrame>& frames) {
  FrameResult r;
  if (frames.empty()) return r;
  auto out = pipeline_.process(frames);
  r.t_s = out.t_s;
  r.update = std::move(out.update);
  r.entities = std::move(out.entities);
  r.events = sensors_.evaluate_frame(r.entities, r.t_s);
  r.reactions = apply_reactions(bindings_, r.events, reaction_state_);
  if (teach_ && teach_->state() == TeachSession::State::recording)
    for (const auto& e : r.entities) teach_->record(e);
  ++frames_;
  last_t_ = r.t_s;
  last_entities_ = r.entities;
  return r;
}

Json Engine::command(const Json& cmd) {
  Json ack = {{"type", "ack"},
              {"id", cmd.contains("id") ? cmd.at("id") : Json(nullptr)},
              {"cmd", cmd.value("cmd", "")},
              {"ok", true}};
  try {
    if (!cmd.contains("cmd") || !cmd.at("cmd").is_string())
      throw CommandError("command needs a 'cmd' string");
    const Json result = apply(cmd.at("cmd").get<std::string>(), cmd);
    for (const auto& [k, v] : result.items()) ack[k] = v;
  } catch (const CommandError& e) {
    ack["ok"] = false;
    ack["error"] = e.what();
  } catch (const TeachError& e) {
    ack["ok"] = false;
    ack["error"] = e.what();
  } catch (const ConfigError& e) {
    ack["ok"] = false;
    ack["error"] = e.what();
  } catch (const Json::exception& e) {
    ack["ok"] = false;
    ack["error"] = std::string("malformed command: ") + e.what();
  }
  if (!ack["ok"].get<bool>()) spdlog::warn("command rejected: {}", ack["error"].get<std::string>());
  return ack;
}

Json Engine::apply(const std::string& name, const Json& cmd) {
  Json result = Json::object();
  if (name == "arm" || name == "disarm") {
    sensors_.set_armed(cmd.at("sensor_id").get<std::string>(), name == "arm");
  } else if (name == "add_sensor") {
    auto sensor = parse_sensor(cmd.at("sensor"));
    const auto id = sensor.id;
    sensors_.add(std::move(sensor));
    result["sensor"] = to_json(*sensors_.find(id));
  } else if (name == "remove_sensor") {
    const auto id = cmd.at("sensor_id").get<std::string>();
    sensors_.remove(id);
    std::erase_if(bindings_, [&](const ReactionBinding& b) { return b.sensor_id == id; });
  } else if (name == "teach_start") {
    if (teach_ && teach_->state() == TeachSession::State::recording)
      throw CommandError("a teach session is already recording");
    const auto entity = cmd.at("entity").get<std::int64_t>();
    if (!pipeline_.tracker().find(entity))
      throw CommandError("unknown entity " + std::to_string(entity));
    teach_.emplace("teach" + std::to_string(++teach_counter_), entity, options_.teach_decimation_m);
    teach_->record(*pipeline_.tracker().find(entity));
    result["session_id"] = teach_->session_id();
  } else if (name == "teach_stop") {
    if (!teach_ || teach_->state() != TeachSession::State::recording)
      throw CommandError("no teach session is recording");
    const auto id = cmd.at("sensor_id").get<std::string>();
    if (sensors_.find(id)) throw CommandError("sensor '" + id + "' already exists");
    const double eps = cmd.value("epsilon_m", options_.teach_epsilon_m);
    TeachResult taught;
    try {
      taught = finalize(*teach_, eps);
    } catch (const TeachError&) {
      teach_.reset();
      throw;
    }
    VirtualSensor s;
    s.id = id;
    if (cmd.contains("classes")) {
      s.classes.clear();
      for (const auto& c : cmd.at("classes")) s.classes.insert(parse_entity_class(c.get<std::string>()));
    }
    s.geometry = taught.mat;
    sensors_.add(s);
    if (options_.sensors_path) persist_sensors(options_.sensors_path);
    result["sensor"] = to_json(*sensors_.find(id));
    result["samples"] = teach_->samples().size();
    result["fallback"] = taught.hull_fallback ? Json("hull") : Json(nullptr);
  } else if (name == "save") {
    std::optional<std::filesystem::path> path = options_.sensors_path;
    if (cmd.contains("path")) path = cmd.at("path").get<std::string>();
    if (!path) throw CommandError("no sensor file to save to");
    persist_sensors(path);
    result["path"] = path->string();
  } else if (name == "snapshot") {
    result["snapshot"] = snapshot();
  } else {
    throw CommandError("unknown command '" + name + "'");
  }
  return result;
}

void Engine::persist_sensors(const std::optional<std::filesystem::path>& path) const {
  if (!path) return;
  write_json_file(*path, to_json(sensor_config()));
  spdlog::info("sensor configuration written to {}", path->string());
}

SensorConfig Engine::sensor_config() const {
  SensorConfig c;
  for (const auto& [id, s] : sensors_.sensors()) c.sensors.push_back(s);
  c.reactions = bindings_;
  return c;
}

Json Engine::snapshot() const {
  Json sensors = Json::array();
  for (const auto& [id, s] : sensors_.sensors()) {
    Json sj = to_json(s);
    if (s.kind() == SensorKind::proximity) {
      sj["level"] = sensors_.current_level(id);
    } else if (s.kind() == SensorKind::mat || s.kind() == SensorKind::oriented_mat) {
      Json inside = Json::array();
      for (const auto& e : last_entities_)
        if (sensors_.reported_inside(id, e.entity_id)) inside.push_back(e.entity_id);
      sj["inside"] = inside;
    }
    sensors.push_back(sj);
  }
  Json entities = Json::array();
  for (const auto& e : last_entities_) entities.push_back(to_json(e));
  Json teach = nullptr;
  if (teach_ && teach_->state() == TeachSession::State::recording)
    teach = {{"session_id", teach_->session_id()},
             {"entity", teach_->entity_id()},
             {"samples", teach_->samples().size()}};
  return {{"type", "snapshot"},
          {"t", last_t_ ? Json(*last_t_) : Json(nullptr)},
          {"sensors", sensors},
          {"entities", entities},
          {"reactions", to_json(reaction_state_)},
          {"teach", teach}};
}

Json Engine::entities_message(const FrameResult& frame) const {
  Json entities = Json::array();
  for (const auto& e : frame.entities) entities.push_back(to_json(e));
  return {{"type", "entities"},
          {"t", frame.t_s},
          {"entities", entities},
          {"reactions", to_json(reaction_state_)}};
}

std::optional<std::vector<PoseFrame>> FrameGrouper::push(PoseFrame frame) {
  if (last_emitted_t_ && !(frame.t_s > *last_emitted_t_))
    throw StreamError("pose frame at t=" + std::to_string(frame.t_s) + " arrived after t=" +
                      std::to_string(*last_emitted_t_));
  std::optional<std::vector<PoseFrame>> done;
  if (!current_.empty()) {
    const double t = current_.front().t_s;
    if (frame.t_s < t)
      throw StreamError("pose stream went backwards in time (t=" + std::to_string(frame.t_s) + ")");
    if (frame.t_s > t) done = flush();
  }
  current_.push_back(std::move(frame));
  return done;
}

std::optional<std::vector<PoseFrame>> FrameGrouper::flush() {
  if (current_.empty()) return std::nullopt;
  last_emitted_t_ = current_.front().t_s;
  std::vector<PoseFrame> out;
  out.swap(current_);
  return out;
}

ReplayStats replay(Engine& engine, std::istream& poses, const ReplayOptions& options,
                   const FrameSink& sink) {
  ReplayStats stats;
  FrameGrouper grouper;
  std::optional<double> t0;
  const auto wall0 = std::chrono::steady_clock::now();

  bool stopped = false;
  auto run_group = [&](const std::vector<PoseFrame>& group) {
    if (options.between_frames && !options.between_frames()) {
      stopped = true;
      return;
    }
    const auto cmds = options.commands.find(stats.frames);
    if (cmds != options.commands.end())
      for (const auto& c : cmds->second) stats.acks.push_back(engine.command(c));
    if (options.speed > 0.0) {
      if (!t0) t0 = group.front().t_s;
      const auto due = wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>((group.front().t_s - *t0) / options.speed));
      std::this_thread::sleep_until(due);
    }
    const auto result = engine.process(group);
    ++stats.frames;
    stats.events += result.events.size();
    if (sink) sink(result);
  };

  std::string line;
  while (!stopped && std::getline(poses, line)) {
    ++stats.lines;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::optional<std::vector<PoseFrame>> ready;
    try {
      ready = grouper.push(parse_pose_line(line));
    } catch (const StreamError& e) {
      if (options.strict) throw;
      ++stats.skipped_lines;
      spdlog::warn("line {}: {} (skipped)", stats.lines, e.what());
      continue;
    }
    if (ready) run_group(*ready);
  }
  if (!stopped)
    if (auto last = grouper.flush()) run_group(*last);
  return stats;
}

std::map<std::size_t, std::vector<Json>> parse_command_trace(std::istream& in) {
  std::map<std::size_t, std::vector<Json>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = Json::parse(line);
      const auto frame = j.at("frame").get<std::size_t>();
      j.erase("frame");
      out[frame].push_back(std::move(j));
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("malformed command trace line: ") + e.what());
    }
  }
  return out;
}

}  // namespace birdseye
