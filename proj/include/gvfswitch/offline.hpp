#ifndef GVFSWITCH_OFFLINE_HPP
#define GVFSWITCH_OFFLINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gvfswitch/config.hpp"
#include "gvfswitch/horde.hpp"
#include "gvfswitch/session_io.hpp"

namespace gvfswitch {

/// Horde laid out for `config` (default tiles when none are given).
Horde make_horde(const EngineConfig& config, HordeOptions options = {});

ModelFile model_from_horde(const Horde& horde, std::uint64_t config_hash);
/// Copies weights by question id; every question in the horde must be present.
void load_model_into(Horde& horde, const ModelFile& model);

/// Config recorded in a log header.
EngineConfig config_from_log(const SessionLog& log);

struct QuestionError {
  std::string id;
  double rmse = 0.0;
  std::int64_t samples = 0;
};

struct PassStats {
  int pass = 0;
  std::vector<QuestionError> online;  // predictions made while learning
  std::vector<QuestionError> frozen;  // end-of-pass weights replayed over the log
};

struct TrainResult {
  ModelFile model;
  std::vector<PassStats> passes;
};

/// Replays the logged samples through pipeline and horde `passes` times.
/// Traces, pipeline state and verifiers restart every pass; weights carry.
/// `initial` seeds the weights (a previous model of the same config).
TrainResult train_offline(const SessionLog& log, int passes, const ModelFile* initial = nullptr);
TrainResult train_offline(const std::string& log_path, int passes);

/// Per-question RMSE of the horde's predictions against matured truncated
/// returns over one replay of the log. Learns only when the horde does.
std::vector<QuestionError> replay_errors(Horde& horde, const EngineConfig& config, const SessionLog& log);

struct TimingStats {
  std::int64_t ticks = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  double total_s = 0.0;
};

struct EvalReport {
  std::int64_t ticks = 0;
  double duration_min = 0.0;
  std::int64_t switch_pulses = 0;
  std::int64_t alarm_rises = 0;
  std::int64_t anticipated = 0;
  std::optional<double> anticipation_rate;
  std::optional<double> median_lead_ticks;
  std::optional<double> mean_lead_ticks;
  std::optional<double> median_lead_ms;
  std::optional<double> mean_lead_ms;
  std::int64_t false_alarms = 0;
  double false_alarms_per_min = 0.0;
  std::int64_t top1_scored = 0;
  std::int64_t top1_correct = 0;
  std::optional<double> top1_accuracy;
  std::vector<QuestionError> rmse;
  TimingStats timing;
  bool online = false;
};

struct EvalOptions {
  bool online = false;  // keep learning during the replay
  bool allow_mismatch = false;
  std::int64_t lead_window = 0;  // 0: one second of ticks
};

/// Pure in (model, log) apart from the timing block.
EvalReport evaluate(const ModelFile& model, const SessionLog& log, const EvalOptions& options = {});

nlohmann::json report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

/// Median of a non-empty sample.
double median(std::vector<double> values);

}  // namespace gvfswitch

#endif
