#ifndef GVFSWITCH_ARM_SIM_HPP
#define GVFSWITCH_ARM_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gvfswitch/common.hpp"
#include "gvfswitch/random.hpp"

namespace gvfswitch {

struct ArmConfig {
  JointArray gains{0.25, 0.25, 0.25, 0.25};  // range per second at |drive| = 1
  double dt = 1.0 / kDefaultTickRateHz;
  JointArray initial_pos{0.1, 0.2, 0.2, 0.5};
};

struct ArmState {
  JointArray pos{};
  JointArray vel{};
  int active_joint = 0;

  bool operator==(const ArmState&) const = default;
};

ArmState initial_arm_state(const ArmConfig& config);

/// First-order kinematics: the active joint moves at gain * drive; positions
/// clamp to [0,1] and the reported velocity is the realised one.
ArmState arm_step(const ArmState& arm, double drive, const ArmConfig& config);

/// Fixed sequential switching: active <- (active + 1) mod 4. Velocities reset.
ArmState switch_mode(const ArmState& arm);

/// Direct switch used by the advisor. Throws ConfigError when target equals
/// the active joint or is out of range.
ArmState switch_mode(const ArmState& arm, int target);

enum class Phase { ShoulderRight, ElbowCycles, ShoulderLeft, WristCycles };

const char* phase_name(Phase phase);
Phase parse_phase(const std::string& name);
int phase_joint(Phase phase);

struct ScriptConfig {
  std::vector<Phase> pattern{Phase::ShoulderRight, Phase::ElbowCycles, Phase::ShoulderLeft, Phase::WristCycles};
  int min_cycles = 2;
  int max_cycles = 5;
  double shoulder_right_goal = 0.9;
  double shoulder_left_goal = 0.1;
  double cycle_high = 0.8;
  double cycle_low = 0.2;
  double min_contraction = 0.6;
  double max_contraction = 0.9;
  int precursor_ticks = 5;     // switching-muscle ramp before the first cue of a transition
  int switch_burst_len = 3;    // ticks the switch cue is held
  int inter_cue_gap = 2;       // rest ticks between consecutive cues
  int min_reaction_ticks = 1;  // pause after reaching the right joint
  int max_reaction_ticks = 3;
  int min_decision_ticks = 2;  // pause after a phase goal before cueing
  int max_decision_ticks = 6;
  int max_dwell_ticks = 2;     // pause at cycle reversals
};

/// Muscle indices: 0 flexor (positive drive), 1 extensor, 2 switching, 3 unused.
struct UserAction {
  JointArray contraction{};
  bool switch_intent = false;
};

/// Scripted user looping through the task pattern with fixed sequential
/// switching in mind. It reacts to the observed arm, so it also copes with
/// switches the advisor makes on its behalf.
class UserScript {
 public:
  UserScript(ScriptConfig config, std::uint64_t seed);

  UserAction step(const ArmState& arm);

  Phase phase() const { return config_.pattern[phase_index_]; }
  int desired_joint() const { return phase_joint(phase()); }
  int cycles_remaining() const { return cycles_remaining_; }
  std::int64_t laps_completed() const { return laps_; }
  std::int64_t phases_completed() const { return phases_completed_; }
  bool cueing() const { return cue_ != Cue::Idle; }
  const ScriptConfig& config() const { return config_; }

  /// Worst-case ticks for one lap, given the slowest contraction the script
  /// draws and the arm gains. Assumes drive >= `min_drive_fraction` of the
  /// contraction level, which the EMG envelope guarantees on average.
  static std::int64_t lap_tick_bound(const ScriptConfig& config, const ArmConfig& arm, double min_drive_fraction);

 private:
  enum class Cue { Idle, Ramp, Burst, Gap };

  void enter_phase(std::size_t index);
  void complete_phase();
  UserAction move_toward(const ArmState& arm);

  ScriptConfig config_;
  Rng rng_;
  std::size_t phase_index_ = 0;
  int cycles_remaining_ = 0;
  bool going_up_ = true;
  double level_ = 0.75;
  int pause_ = 0;
  Cue cue_ = Cue::Idle;
  int cue_tick_ = 0;
  bool first_cue_ = true;
  int last_active_ = -1;
  std::int64_t laps_ = 0;
  std::int64_t phases_completed_ = 0;
};

struct EmgSynthConfig {
  double burst_gain = 1.0;
  double noise_sigma = 0.1;     // contraction-proportional extra noise
  double baseline_sigma = 0.02; // resting noise
};

/// emg[i] = contraction[i] * (burst_gain * s_i + noise_sigma * m_i) + baseline_sigma * n_i,
/// with s, m, n standard normal draws taken in electrode order.
JointArray synth_emg(const JointArray& contraction, const EmgSynthConfig& config, Rng& rng);

}  // namespace gvfswitch

#endif
