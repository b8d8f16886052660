#ifndef GVFSWITCH_CONFIG_HPP
#define GVFSWITCH_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "gvfswitch/arm_sim.hpp"
#include "gvfswitch/horde.hpp"
#include "gvfswitch/signal_pipeline.hpp"
#include "gvfswitch/switch_advisor.hpp"
#include "gvfswitch/tile_coder.hpp"

namespace gvfswitch {

enum class RunMode { Scripted, Piloted, Replay };

const char* run_mode_name(RunMode m);
RunMode parse_run_mode(const std::string& name);

struct EngineConfig {
  double tick_rate_hz = kDefaultTickRateHz;
  std::uint64_t seed = 42;
  RunMode mode = RunMode::Scripted;
  PipelineConfig pipeline;
  std::optional<TileCoderSpec> tiles;  // absent: default_tile_spec over the pipeline layout
  HordeConfig horde{build_default_questions(10), {}, {}};
  AdvisorConfig advisor;
  ArmConfig arm;
  ScriptConfig script;
  EmgSynthConfig emg;
  bool learning = true;
  bool pad_verifier = false;
};

void validate_config(const EngineConfig& config);

/// Tile spec actually used: the explicit one, or the default for the layout.
TileCoderSpec effective_tiles(const EngineConfig& config);

nlohmann::json config_to_json(const EngineConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
EngineConfig config_from_json(const nlohmann::json& j);
EngineConfig load_config(const std::string& path);

/// Canonical text of the blocks that shape what the learners see and store
/// (pipeline, tiles, horde): compact JSON with sorted keys.
std::string canonical_learning_form(const EngineConfig& config);

/// FNV-1a 64 of canonical_learning_form. Stamps logs and model files; runs
/// that differ only in seed, simulator, advisor or pacing share a hash.
std::uint64_t config_hash(const EngineConfig& config);

}  // namespace gvfswitch

#endif
