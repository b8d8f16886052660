#include "gvfswitch/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace gvfswitch {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* block, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string("config block '") + block + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in config block '" + block + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

json joints_json(const JointArray& a) { return json::array({a[0], a[1], a[2], a[3]}); }

void read_joints(const json& j, const char* key, JointArray& out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != kNumJoints) throw ConfigError(std::string("'") + key + "' needs 4 entries");
  for (int i = 0; i < kNumJoints; ++i) out[i] = v[i];
}

json params_json(const LearnerParams& p) {
  return {{"alpha_base", p.alpha_base},
          {"lambda", p.lambda},
          {"replacing_traces", p.replacing_traces},
          {"trace_epsilon", p.trace_epsilon}};
}

LearnerParams params_from(const json& j, LearnerParams p) {
  check_keys(j, "learner", {"alpha_base", "lambda", "replacing_traces", "trace_epsilon"});
  read(j, "alpha_base", p.alpha_base);
  read(j, "lambda", p.lambda);
  read(j, "replacing_traces", p.replacing_traces);
  read(j, "trace_epsilon", p.trace_epsilon);
  return p;
}

json pipeline_json(const PipelineConfig& p) {
  return {{"mav_window", p.mav_window},         {"drive_max", p.drive_max},
          {"switch_max", p.switch_max},         {"velocity_max", p.velocity_max},
          {"trace_decays", p.trace_decays},     {"traced_signals", p.traced_signals}};
}

json tiles_json(const TileCoderSpec& t) {
  json groups = json::array();
  for (const auto& g : t.groups) {
    groups.push_back({{"dims", g.dims}, {"tiles_per_dim", g.tiles_per_dim}, {"num_tilings", g.num_tilings},
                      {"wrap", g.wrap}});
  }
  return {{"groups", groups}, {"hash_bits", t.hash_bits}, {"seed", t.seed}};
}

json horde_json(const HordeConfig& h) {
  json qs = json::array();
  for (const auto& q : h.questions) qs.push_back({{"id", q.id}, {"cumulant", q.cumulant}, {"timescale", q.timescale}});
  json overrides = json::object();
  for (const auto& [id, p] : h.overrides) overrides[id] = params_json(p);
  return {{"questions", qs}, {"learner", params_json(h.defaults)}, {"overrides", overrides}};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::Scripted: return "scripted";
    case RunMode::Piloted: return "piloted";
    case RunMode::Replay: return "replay";
  }
  return "?";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "scripted") return RunMode::Scripted;
  if (name == "piloted") return RunMode::Piloted;
  if (name == "replay") return RunMode::Replay;
  throw ConfigError("unknown run mode: " + name);
}

void validate_config(const EngineConfig& c) {
  if (!(c.tick_rate_hz > 0.0)) throw ConfigError("tick_rate_hz must be > 0");
  validate_horde_config(c.horde);
  validate_advisor_config(c.advisor);
  SignalPipeline pipeline(c.pipeline);
  TileCoder coder(effective_tiles(c).resolve(pipeline.layout()), pipeline.layout_ptr());
  (void)coder;
  UserScript script(c.script, 0);
  (void)script;
  if (c.emg.burst_gain < 0 || c.emg.noise_sigma < 0 || c.emg.baseline_sigma < 0) {
    throw ConfigError("EMG synth parameters must be >= 0");
  }
}

TileCoderSpec effective_tiles(const EngineConfig& c) {
  if (c.tiles) return *c.tiles;
  return default_tile_spec(SignalPipeline(c.pipeline).layout());
}

json config_to_json(const EngineConfig& c) {
  json pattern = json::array();
  for (Phase p : c.script.pattern) pattern.push_back(phase_name(p));
  const auto& s = c.script;
  return {
      {"tick_rate_hz", c.tick_rate_hz},
      {"seed", c.seed},
      {"mode", run_mode_name(c.mode)},
      {"learning", c.learning},
      {"pad_verifier", c.pad_verifier},
      {"pipeline", pipeline_json(c.pipeline)},
      {"tiles", tiles_json(effective_tiles(c))},
      {"horde", horde_json(c.horde)},
      {"advisor",
       {{"theta_on", c.advisor.theta_on},
        {"theta_off", c.advisor.theta_off},
        {"refractory_ticks", c.advisor.refractory_ticks},
        {"autonomy", autonomy_name(c.advisor.autonomy)},
        {"in_use_speed", c.advisor.in_use_speed}}},
      {"simulator",
       {{"arm", {{"gains", joints_json(c.arm.gains)}, {"initial_pos", joints_json(c.arm.initial_pos)}}},
        {"emg",
         {{"burst_gain", c.emg.burst_gain}, {"noise_sigma", c.emg.noise_sigma}, {"baseline_sigma", c.emg.baseline_sigma}}},
        {"script",
         {{"pattern", pattern},
          {"min_cycles", s.min_cycles},
          {"max_cycles", s.max_cycles},
          {"shoulder_right_goal", s.shoulder_right_goal},
          {"shoulder_left_goal", s.shoulder_left_goal},
          {"cycle_high", s.cycle_high},
          {"cycle_low", s.cycle_low},
          {"min_contraction", s.min_contraction},
          {"max_contraction", s.max_contraction},
          {"precursor_ticks", s.precursor_ticks},
          {"switch_burst_len", s.switch_burst_len},
          {"inter_cue_gap", s.inter_cue_gap},
          {"min_reaction_ticks", s.min_reaction_ticks},
          {"max_reaction_ticks", s.max_reaction_ticks},
          {"min_decision_ticks", s.min_decision_ticks},
          {"max_decision_ticks", s.max_decision_ticks},
          {"max_dwell_ticks", s.max_dwell_ticks}}}}},
  };
}

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  check_keys(j, "root",
             {"tick_rate_hz", "seed", "mode", "learning", "pad_verifier", "pipeline", "tiles", "horde", "advisor",
              "simulator"});
  read(j, "tick_rate_hz", c.tick_rate_hz);
  read(j, "seed", c.seed);
  if (j.contains("mode")) c.mode = parse_run_mode(j.at("mode").get<std::string>());
  read(j, "learning", c.learning);
  read(j, "pad_verifier", c.pad_verifier);

  if (j.contains("pipeline")) {
    const auto& p = j.at("pipeline");
    check_keys(p, "pipeline", {"mav_window", "drive_max", "switch_max", "velocity_max", "trace_decays", "traced_signals"});
    read(p, "mav_window", c.pipeline.mav_window);
    read(p, "drive_max", c.pipeline.drive_max);
    read(p, "switch_max", c.pipeline.switch_max);
    read(p, "velocity_max", c.pipeline.velocity_max);
    read(p, "trace_decays", c.pipeline.trace_decays);
    read(p, "traced_signals", c.pipeline.traced_signals);
  }
  if (j.contains("tiles")) {
    const auto& t = j.at("tiles");
    check_keys(t, "tiles", {"groups", "hash_bits", "seed"});
    TileCoderSpec spec;
    read(t, "hash_bits", spec.hash_bits);
    read(t, "seed", spec.seed);
    if (t.contains("groups")) {
      for (const auto& g : t.at("groups")) {
        check_keys(g, "tiles.groups[]", {"dims", "tiles_per_dim", "num_tilings", "wrap"});
        TilingGroupSpec gs;
        read(g, "dims", gs.dims);
        read(g, "tiles_per_dim", gs.tiles_per_dim);
        read(g, "num_tilings", gs.num_tilings);
        read(g, "wrap", gs.wrap);
        spec.groups.push_back(std::move(gs));
      }
    }
    c.tiles = spec;
  }
  if (j.contains("horde")) {
    const auto& h = j.at("horde");
    check_keys(h, "horde", {"questions", "learner", "overrides", "timescale"});
    if (h.contains("timescale")) c.horde.questions = build_default_questions(h.at("timescale").get<int>());
    if (h.contains("questions")) {
      c.horde.questions.clear();
      for (const auto& q : h.at("questions")) {
        check_keys(q, "horde.questions[]", {"id", "cumulant", "timescale"});
        c.horde.questions.push_back(make_question(q.at("id").get<std::string>(), q.at("cumulant").get<std::string>(),
                                                  q.value("timescale", 10)));
      }
    }
    if (h.contains("learner")) c.horde.defaults = params_from(h.at("learner"), c.horde.defaults);
    if (h.contains("overrides")) {
      for (const auto& [id, p] : h.at("overrides").items()) c.horde.overrides[id] = params_from(p, c.horde.defaults);
    }
  }
  if (j.contains("advisor")) {
    const auto& a = j.at("advisor");
    check_keys(a, "advisor", {"theta_on", "theta_off", "refractory_ticks", "autonomy", "in_use_speed"});
    read(a, "theta_on", c.advisor.theta_on);
    read(a, "theta_off", c.advisor.theta_off);
    read(a, "refractory_ticks", c.advisor.refractory_ticks);
    read(a, "in_use_speed", c.advisor.in_use_speed);
    if (a.contains("autonomy")) c.advisor.autonomy = parse_autonomy(a.at("autonomy").get<std::string>());
  }
  if (j.contains("simulator")) {
    const auto& sim = j.at("simulator");
    check_keys(sim, "simulator", {"arm", "emg", "script"});
    if (sim.contains("arm")) {
      const auto& a = sim.at("arm");
      check_keys(a, "simulator.arm", {"gains", "initial_pos"});
      read_joints(a, "gains", c.arm.gains);
      read_joints(a, "initial_pos", c.arm.initial_pos);
    }
    if (sim.contains("emg")) {
      const auto& e = sim.at("emg");
      check_keys(e, "simulator.emg", {"burst_gain", "noise_sigma", "baseline_sigma"});
      read(e, "burst_gain", c.emg.burst_gain);
      read(e, "noise_sigma", c.emg.noise_sigma);
      read(e, "baseline_sigma", c.emg.baseline_sigma);
    }
    if (sim.contains("script")) {
      const auto& s = sim.at("script");
      check_keys(s, "simulator.script",
                 {"pattern", "min_cycles", "max_cycles", "shoulder_right_goal", "shoulder_left_goal", "cycle_high",
                  "cycle_low", "min_contraction", "max_contraction", "precursor_ticks", "switch_burst_len",
                  "inter_cue_gap", "min_reaction_ticks", "max_reaction_ticks", "min_decision_ticks",
                  "max_decision_ticks", "max_dwell_ticks"});
      auto& sc = c.script;
      if (s.contains("pattern")) {
        sc.pattern.clear();
        for (const auto& p : s.at("pattern")) sc.pattern.push_back(parse_phase(p.get<std::string>()));
      }
      read(s, "min_cycles", sc.min_cycles);
      read(s, "max_cycles", sc.max_cycles);
      read(s, "shoulder_right_goal", sc.shoulder_right_goal);
      read(s, "shoulder_left_goal", sc.shoulder_left_goal);
      read(s, "cycle_high", sc.cycle_high);
      read(s, "cycle_low", sc.cycle_low);
      read(s, "min_contraction", sc.min_contraction);
      read(s, "max_contraction", sc.max_contraction);
      read(s, "precursor_ticks", sc.precursor_ticks);
      read(s, "switch_burst_len", sc.switch_burst_len);
      read(s, "inter_cue_gap", sc.inter_cue_gap);
      read(s, "min_reaction_ticks", sc.min_reaction_ticks);
      read(s, "max_reaction_ticks", sc.max_reaction_ticks);
      read(s, "min_decision_ticks", sc.min_decision_ticks);
      read(s, "max_decision_ticks", sc.max_decision_ticks);
      read(s, "max_dwell_ticks", sc.max_dwell_ticks);
    }
  }
  c.arm.dt = 1.0 / c.tick_rate_hz;
  validate_config(c);
  return c;
}

EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string canonical_learning_form(const EngineConfig& c) {
  const json j = {{"pipeline", pipeline_json(c.pipeline)},
                  {"tiles", tiles_json(effective_tiles(c))},
                  {"horde", horde_json(c.horde)}};
  return j.dump();
}

std::uint64_t config_hash(const EngineConfig& c) { return fnv1a(canonical_learning_form(c)); }

}  // namespace gvfswitch
