#include "gvfswitch/telemetry.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace gvfswitch {

using nlohmann::json;

namespace {

CommandKind parse_kind(const std::string& name, const std::optional<std::string>& id) {
  if (name == "drive") return CommandKind::Drive;
  if (name == "switch") return CommandKind::Switch;
  if (name == "set-autonomy") return CommandKind::SetAutonomy;
  if (name == "toggle-learning") return CommandKind::ToggleLearning;
  if (name == "save-model") return CommandKind::SaveModel;
  throw CommandError(name, "unknown command", id);
}

double parse_drive(const std::string& text, const std::optional<std::string>& id) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw CommandError("drive", "value must be a number", id);
  }
  return v;
}

void finish(Command& c, const std::string& name, const std::optional<std::string>& arg) {
  const bool needs_arg = c.kind != CommandKind::Switch;
  if (needs_arg && !arg) throw CommandError(name, "missing argument", c.id);
  if (!needs_arg && arg) throw CommandError(name, "takes no argument", c.id);
  switch (c.kind) {
    case CommandKind::Drive:
      c.value = parse_drive(*arg, c.id);
      if (c.value < -1.0 || c.value > 1.0) throw CommandError(name, "out of range", c.id);
      break;
    case CommandKind::SetAutonomy:
      try {
        c.autonomy = parse_autonomy(*arg);
      } catch (const ConfigError&) {
        throw CommandError(name, "expected manual, suggest or auto", c.id);
      }
      break;
    case CommandKind::ToggleLearning:
      if (*arg == "on") {
        c.on = true;
      } else if (*arg == "off") {
        c.on = false;
      } else {
        throw CommandError(name, "expected on or off", c.id);
      }
      break;
    case CommandKind::SaveModel:
      if (arg->empty()) throw CommandError(name, "empty path", c.id);
      c.path = *arg;
      break;
    case CommandKind::Switch:
      break;
  }
}

json joints(const JointArray& a) { return json::array({a[0], a[1], a[2], a[3]}); }

}  // namespace

const char* command_name(CommandKind kind) {
  switch (kind) {
    case CommandKind::Drive: return "drive";
    case CommandKind::Switch: return "switch";
    case CommandKind::SetAutonomy: return "set-autonomy";
    case CommandKind::ToggleLearning: return "toggle-learning";
    case CommandKind::SaveModel: return "save-model";
  }
  return "?";
}

Command parse_command(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw CommandError("", "empty command");
  Command c;
  if (text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception&) {
      throw CommandError("", "malformed JSON");
    }
    if (!j.is_object() || !j.contains("cmd") || !j["cmd"].is_string()) throw CommandError("", "missing 'cmd'");
    if (j.contains("id")) c.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    const std::string name = j["cmd"].get<std::string>();
    c.kind = parse_kind(name, c.id);
    std::optional<std::string> arg;
    if (j.contains("value")) {
      const auto& v = j["value"];
      if (v.is_string()) {
        arg = v.get<std::string>();
      } else if (v.is_number()) {
        arg = v.dump();
      } else if (v.is_boolean()) {
        arg = v.get<bool>() ? "on" : "off";
      } else {
        throw CommandError(name, "bad value", c.id);
      }
    }
    finish(c, name, arg);
    return c;
  }
  std::istringstream in(text);
  std::string name, arg, extra;
  in >> name;
  c.kind = parse_kind(name, std::nullopt);
  std::optional<std::string> a;
  if (in >> arg) a = arg;
  if (in >> extra) throw CommandError(name, "too many arguments");
  finish(c, name, a);
  return c;
}

const char* event_kind_name(EngineEvent::Kind kind) {
  switch (kind) {
    case EngineEvent::Kind::Switch: return "switch";
    case EngineEvent::Kind::AlarmRise: return "alarm_rise";
    case EngineEvent::Kind::Override: return "override";
  }
  return "?";
}

std::string state_message(const SessionLogRecord& r, const std::vector<std::string>& question_ids, bool learning) {
  json preds = json::object();
  for (std::size_t q = 0; q < r.predictions.size() && q < question_ids.size(); ++q) {
    preds[question_ids[q]] = r.predictions[q].normalized;
  }
  const auto& a = r.advisor;
  json m = {
      {"type", "state"},
      {"tick", r.sample.step},
      {"time", r.sample.time_s},
      {"joints", {{"pos", joints(r.sample.joint_pos)}, {"vel", joints(r.sample.joint_vel)}}},
      {"active_joint", r.sample.active_joint},
      {"switch_pulse", r.sample.switch_pulse},
      {"emg", joints(r.processed.emg_mav)},
      {"channels", {{"drive", r.processed.ch_drive}, {"switch", r.processed.ch_switch}}},
      {"predictions", preds},
      {"advisor",
       {{"alarm", a.timing_alarm},
        {"ranking", json::array({a.ranking[0], a.ranking[1], a.ranking[2], a.ranking[3]})},
        {"suggested", a.suggested_joint},
        {"action", action_name(a.action)},
        {"lead_candidate_tick", a.lead_candidate_tick ? json(*a.lead_candidate_tick) : json(nullptr)}}},
      {"autonomy", autonomy_name(r.autonomy)},
      {"learning", learning},
  };
  return m.dump();
}

std::string event_message(const EngineEvent& e) {
  json m = {{"type", "event"}, {"kind", event_kind_name(e.kind)}, {"tick", e.tick}};
  if (e.kind != EngineEvent::Kind::AlarmRise) {
    m["from"] = e.from;
    m["to"] = e.to;
    m["source"] = source_name(e.source);
  }
  return m.dump();
}

std::string ack_message(const Command& c, std::int64_t tick) {
  json m = {{"type", "ack"}, {"command", command_name(c.kind)}, {"tick", tick}};
  if (c.id) m["id"] = *c.id;
  return m.dump();
}

std::string error_message(const std::string& command, const std::string& reason, const std::optional<std::string>& id) {
  json m = {{"type", "error"}, {"command", command}, {"reason", reason}};
  if (id) m["id"] = *id;
  return m.dump();
}

std::string hello_message(const std::string& role, const std::vector<std::string>& question_ids,
                          const std::string& mode, double tick_rate_hz) {
  return json{{"type", "hello"},
              {"role", role},
              {"questions", question_ids},
              {"mode", mode},
              {"tick_rate_hz", tick_rate_hz}}
      .dump();
}

std::string message_type(const std::string& message) {
  try {
    const json j = json::parse(message);
    if (j.is_object() && j.contains("type") && j["type"].is_string()) return j["type"].get<std::string>();
  } catch (const json::exception&) {
  }
  return "";
}

}  // namespace gvfswitch
