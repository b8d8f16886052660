#ifndef GVFSWITCH_SWITCH_ADVISOR_HPP
#define GVFSWITCH_SWITCH_ADVISOR_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gvfswitch/common.hpp"

namespace gvfswitch {

enum class Autonomy { Manual, Suggest, Auto };
enum class SwitchAction { None, ReroutedUserSwitch, AutoSwitch };

const char* autonomy_name(Autonomy a);
Autonomy parse_autonomy(const std::string& name);
const char* action_name(SwitchAction a);
SwitchAction parse_action(const std::string& name);

struct AdvisorConfig {
  double theta_on = 0.15;
  double theta_off = 0.10;
  int refractory_ticks = 15;
  Autonomy autonomy = Autonomy::Manual;
  // A joint counts as in use (ending a switching episode) above this speed.
  double in_use_speed = 0.01;
};

void validate_advisor_config(const AdvisorConfig& config);

/// Hysteresis alarm on the normalized switch-event prediction.
class TimingDetector {
 public:
  explicit TimingDetector(const AdvisorConfig& config) : config_(config) {}

  /// Returns the alarm level after this tick; rose() reports whether it rose
  /// on this tick.
  bool step(std::int64_t tick, double normalized_prediction);
  bool alarm() const { return alarm_; }
  bool rose() const { return rose_; }
  std::optional<std::int64_t> last_rise() const { return last_rise_; }
  void reset();

 private:
  AdvisorConfig config_;
  bool alarm_ = false;
  bool rose_ = false;
  double previous_ = 0.0;
  std::optional<std::int64_t> last_rise_;
};

using JointRanking = std::array<int, kNumJoints>;

struct RankResult {
  JointRanking ranking{};
  int suggested_joint = 0;
};

/// Joints by descending prediction, ties in sequential order after `current`.
/// The suggestion is the best joint that is neither `current` nor flagged in
/// `excluded`.
RankResult rank_joints(const JointArray& predictions, int current,
                       const std::array<bool, kNumJoints>& excluded = {});

struct Decision {
  SwitchAction action = SwitchAction::None;
  std::optional<int> target;  // joint to switch to this tick
};

/// Mode table: Manual passes user pulses through as sequential switches;
/// Suggest reroutes user pulses to the suggestion; Auto also switches on an
/// alarm rise, with a same-tick user pulse taking precedence.
Decision decide(Autonomy autonomy, bool alarm_rise, int suggested_joint, bool user_pulse, int current);

struct AdvisorOutput {
  bool timing_alarm = false;
  JointRanking ranking{0, 1, 2, 3};
  int suggested_joint = 1;
  SwitchAction action = SwitchAction::None;
  std::optional<std::int64_t> lead_candidate_tick;

  bool operator==(const AdvisorOutput&) const = default;
};

struct AdvisorTick {
  AdvisorOutput output;
  Decision decision;
  bool alarm_rose = false;
};

/// Per-tick advisor state machine. Within one switching episode (from the
/// first switch until a joint is used again) joints already left are not
/// suggested again, so repeated user pulses always reach every joint.
class SwitchAdvisor {
 public:
  explicit SwitchAdvisor(AdvisorConfig config);

  AdvisorTick step(std::int64_t tick, double switch_prediction_normalized, const JointArray& activity_normalized,
                   bool user_pulse, int current, double active_speed);

  void set_autonomy(Autonomy a) { config_.autonomy = a; }
  Autonomy autonomy() const { return config_.autonomy; }
  const AdvisorConfig& config() const { return config_; }
  void reset();

 private:
  AdvisorConfig config_;
  TimingDetector detector_;
  std::array<bool, kNumJoints> left_{};
};

struct LeadAccount {
  std::vector<std::int64_t> leads;      // one per matched pulse
  std::vector<bool> pulse_matched;      // per pulse
  std::int64_t matched_pulses = 0;
  std::int64_t missed_pulses = 0;
  std::int64_t false_alarms = 0;
};

/// Matches each pulse to the nearest strictly preceding alarm rise at most
/// `window` ticks earlier. Alarms that match no pulse are false alarms.
LeadAccount lead_time_account(const std::vector<std::int64_t>& alarm_rises, const std::vector<std::int64_t>& pulses,
                              std::int64_t window = 15);

}  // namespace gvfswitch

#endif
