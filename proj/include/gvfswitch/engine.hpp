#ifndef GVFSWITCH_ENGINE_HPP
#define GVFSWITCH_ENGINE_HPP

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gvfswitch/arm_sim.hpp"
#include "gvfswitch/config.hpp"
#include "gvfswitch/horde.hpp"
#include "gvfswitch/offline.hpp"
#include "gvfswitch/session_io.hpp"
#include "gvfswitch/switch_advisor.hpp"
#include "gvfswitch/telemetry.hpp"

namespace gvfswitch {

/// Fixed-bucket latency histogram (10 us buckets up to 200 ms); bounded memory
/// however long the engine runs.
class LatencyHistogram {
 public:
  void add(double ms);
  std::int64_t count() const { return count_; }
  double mean_ms() const { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }
  double max_ms() const { return max_; }
  /// Upper edge of the bucket holding the q-quantile.
  double quantile_ms(double q) const;
  void reset();

 private:
  static constexpr double kBucketMs = 0.01;
  static constexpr std::size_t kBuckets = 20000;
  std::vector<std::uint32_t> buckets_ = std::vector<std::uint32_t>(kBuckets + 1, 0);
  std::int64_t count_ = 0;
  double sum_ = 0.0;
  double max_ = 0.0;
};

/// Message bound for clients; client 0 means every client.
struct Outbound {
  int client = 0;
  std::string text;
  bool droppable = false;  // state messages
};

struct TickOutput {
  SessionLogRecord record;
  std::vector<EngineEvent> events;
  std::vector<Outbound> messages;  // replies, events and the state message, in that order
  double core_ms = 0.0;
};

/// Owns every piece of mutable session state and advances it one tick at a
/// time in the fixed stage order. Single-threaded; other threads talk to it
/// through queues drained by run_loop.
class Engine {
 public:
  explicit Engine(EngineConfig config, HordeOptions horde_options = {});

  /// Replay mode input: the samples to feed, in tick order.
  void set_replay(std::vector<TimeStepSample> samples);
  bool finished() const;

  void load_model(const ModelFile& model, bool allow_mismatch = false);
  ModelFile model() const;

  void open_log(const std::string& path);
  void close_log();
  /// Keep every record in memory as well (tests, acceptance runs).
  void capture(bool on) { capture_ = on; }
  const std::vector<SessionLogRecord>& captured() const { return captured_; }
  SessionLogHeader log_header() const;
  /// Whether state messages are rendered at all (off for headless runs).
  void set_telemetry(bool on) { telemetry_ = on; }

  /// Queued; applied at the start of the next tick.
  void submit(Command command) { pending_.push_back(std::move(command)); }
  /// Validates and applies a command now. Returns the ack or error message.
  std::string handle_command(const Command& command);

  const TickOutput& tick();

  std::int64_t ticks() const { return step_; }
  const EngineConfig& config() const { return config_; }
  std::uint64_t config_hash() const { return hash_; }
  const std::vector<std::string>& question_ids() const { return question_ids_; }
  const Horde& horde() const { return horde_; }
  Horde& horde() { return horde_; }
  const ArmState& arm() const { return arm_; }
  const UserScript& script() const { return script_; }
  Autonomy autonomy() const { return advisor_.autonomy(); }
  bool learning() const { return horde_.learning(); }
  void set_learning(bool on) { horde_.set_learning(on); }
  void set_autonomy(Autonomy a) { advisor_.set_autonomy(a); }
  const LatencyHistogram& core_timing() const { return timing_; }

 private:
  UserAction pilot_action();
  TimeStepSample next_sample(UserAction& action);

  EngineConfig config_;
  std::uint64_t hash_;
  SignalPipeline pipeline_;
  Horde horde_;
  SwitchAdvisor advisor_;
  UserScript script_;
  Rng emg_rng_;
  ArmState arm_;
  std::vector<std::string> question_ids_;
  std::size_t switch_q_ = 0;
  std::array<std::size_t, kNumJoints> joint_q_{};

  std::int64_t step_ = 0;
  int prev_pulse_ = 0;
  std::optional<std::int64_t> last_auto_switch_;
  double pilot_drive_ = 0.0;
  int pilot_burst_ = 0;  // queued switch cues
  int pilot_cue_tick_ = 0;

  std::vector<TimeStepSample> replay_;
  std::size_t replay_pos_ = 0;

  std::vector<Command> pending_;
  std::unique_ptr<SessionLogWriter> log_;
  bool capture_ = false;
  std::vector<SessionLogRecord> captured_;
  bool telemetry_ = true;
  TickOutput out_;
  LatencyHistogram timing_;
};

struct LoopOptions {
  std::int64_t max_ticks = -1;  // negative: until stopped or the replay ends
  bool paced = false;           // wall-clock pacing at the configured rate
  const std::atomic<bool>* stop = nullptr;
  BoundedQueue<Command>* commands = nullptr;
  std::function<void(const TickOutput&)> on_tick;
};

struct LoopStats {
  std::int64_t ticks = 0;
  std::int64_t overruns = 0;
  double core_mean_ms = 0.0;
  double core_p99_ms = 0.0;
  double core_max_ms = 0.0;
  double wall_s = 0.0;
};

/// Runs ticks until done. Late ticks are completed and counted, never
/// skipped. On divergence or log failure the log is flushed and the error
/// rethrown.
LoopStats run_loop(Engine& engine, const LoopOptions& options);

/// Headless scripted session of `ticks` ticks; records kept in memory.
SessionLog simulate_session(const EngineConfig& config, std::int64_t ticks);

}  // namespace gvfswitch

#endif
