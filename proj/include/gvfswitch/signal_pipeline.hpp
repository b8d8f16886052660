#ifndef GVFSWITCH_SIGNAL_PIPELINE_HPP
#define GVFSWITCH_SIGNAL_PIPELINE_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gvfswitch/common.hpp"

namespace gvfswitch {

/// One 15 Hz tick of raw sensorimotor data.
struct TimeStepSample {
  std::int64_t step = 0;
  double time_s = 0.0;
  JointArray emg_raw{};
  JointArray joint_pos{};
  JointArray joint_vel{};
  int switch_pulse = 0;
  int active_joint = 0;

  bool operator==(const TimeStepSample&) const = default;
};

/// Throws ConfigError when a sample violates the field invariants.
void validate_sample(const TimeStepSample& sample, double tick_rate_hz = kDefaultTickRateHz);

struct ProcessedSignals {
  JointArray emg_mav{};
  double ch_drive = 0.0;
  double ch_switch = 0.0;

  bool operator==(const ProcessedSignals&) const = default;
};

struct PipelineConfig {
  int mav_window = 3;
  double drive_max = 1.0;
  double switch_max = 1.0;
  double velocity_max = 0.5;
  std::vector<double> trace_decays{0.8, 0.95, 0.99};
  std::vector<std::string> traced_signals{"ch_drive", "ch_switch", "switch_pulse"};
};

/// A named scalar read off one tick: used both for trace inputs and for GVF
/// cumulants. Recognised names:
///   switch_pulse, ch_drive, ch_drive_abs, ch_switch, emg_mav[i],
///   joint_speed[j] (|vel|/velocity_max, clipped to 1), joint_moving[j] (0/1),
///   constant (always 1).
class SignalSelector {
 public:
  enum class Kind { SwitchPulse, ChDrive, ChDriveAbs, ChSwitch, EmgMav, JointSpeed, JointMoving, Constant };

  static SignalSelector parse(const std::string& name);

  double value(const TimeStepSample& sample, const ProcessedSignals& processed,
               double velocity_max) const;
  double lo() const { return kind_ == Kind::ChDrive ? -1.0 : 0.0; }
  double hi() const { return 1.0; }
  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }
  int index() const { return index_; }

 private:
  SignalSelector(std::string name, Kind kind, int index)
      : name_(std::move(name)), kind_(kind), index_(index) {}
  std::string name_;
  Kind kind_;
  int index_;
};

/// Exponentially decayed traces, one per (signal, decay) pair.
class TraceBank {
 public:
  TraceBank(std::vector<double> decay_rates, std::vector<std::string> tracked_signals);

  /// inputs[s] is the current value of tracked signal s.
  /// trace <- decay * trace + (1 - decay) * input.
  void update(const std::vector<double>& inputs);
  void reset();

  double trace(std::size_t signal, std::size_t decay) const {
    return traces_[signal * decay_rates_.size() + decay];
  }
  const std::vector<double>& flattened() const { return traces_; }
  const std::vector<double>& decay_rates() const { return decay_rates_; }
  const std::vector<std::string>& tracked_signals() const { return tracked_; }

 private:
  std::vector<double> decay_rates_;
  std::vector<std::string> tracked_;
  std::vector<double> traces_;
};

struct RangeDescriptor {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

using StateLayout = std::vector<RangeDescriptor>;

struct StateVector {
  std::vector<double> values;
  std::shared_ptr<const StateLayout> layout;
};

/// Index of a named dimension in a layout; throws ConfigError when absent.
int layout_index(const StateLayout& layout, const std::string& name);

/// Causal, deterministic per-session preprocessing: EMG envelope, control
/// channels, decayed traces, and the fixed-layout state vector.
class SignalPipeline {
 public:
  explicit SignalPipeline(PipelineConfig config = {});

  const PipelineConfig& config() const { return config_; }
  const StateLayout& layout() const { return *layout_; }
  std::shared_ptr<const StateLayout> layout_ptr() const { return layout_; }

  /// Advances the MAV window by one sample.
  ProcessedSignals process(const TimeStepSample& sample);
  void update_traces(const ProcessedSignals& processed, const TimeStepSample& sample);
  StateVector build_state_vector(const TimeStepSample& sample,
                                 const ProcessedSignals& processed) const;

  struct Output {
    ProcessedSignals processed;
    StateVector state;
  };
  /// process + update_traces + build_state_vector.
  Output step(const TimeStepSample& sample);

  const TraceBank& traces() const { return bank_; }
  void reset();

 private:
  PipelineConfig config_;
  std::vector<SignalSelector> traced_;
  TraceBank bank_;
  std::shared_ptr<const StateLayout> layout_;
  // ring of rectified samples, mav_window rows of kNumJoints
  std::vector<JointArray> window_;
  std::size_t head_ = 0;
};

}  // namespace gvfswitch

#endif
