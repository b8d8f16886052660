#include "gvfswitch/arm_sim.hpp"

#include <algorithm>
#include <cmath>

namespace gvfswitch {

ArmState initial_arm_state(const ArmConfig& config) {
  ArmState arm;
  arm.pos = config.initial_pos;
  for (double& p : arm.pos) p = std::clamp(p, 0.0, 1.0);
  return arm;
}

ArmState arm_step(const ArmState& arm, double drive, const ArmConfig& config) {
  ArmState next = arm;
  next.vel.fill(0.0);
  const int j = arm.active_joint;
  const double commanded = config.gains[j] * std::clamp(drive, -1.0, 1.0);
  if (commanded == 0.0) return next;
  const double target = arm.pos[j] + commanded * config.dt;
  const double clamped = std::clamp(target, 0.0, 1.0);
  next.pos[j] = clamped;
  next.vel[j] = clamped == target ? commanded : (clamped - arm.pos[j]) / config.dt;
  return next;
}

ArmState switch_mode(const ArmState& arm) {
  ArmState next = arm;
  next.vel.fill(0.0);
  next.active_joint = (arm.active_joint + 1) % kNumJoints;
  return next;
}

ArmState switch_mode(const ArmState& arm, int target) {
  if (target < 0 || target >= kNumJoints) throw ConfigError("switch target out of range");
  if (target == arm.active_joint) throw ConfigError("switch target equals the active joint");
  ArmState next = arm;
  next.vel.fill(0.0);
  next.active_joint = target;
  return next;
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::ShoulderRight: return "shoulder_right";
    case Phase::ElbowCycles: return "elbow_cycles";
    case Phase::ShoulderLeft: return "shoulder_left";
    case Phase::WristCycles: return "wrist_cycles";
  }
  return "?";
}

Phase parse_phase(const std::string& name) {
  for (Phase p : {Phase::ShoulderRight, Phase::ElbowCycles, Phase::ShoulderLeft, Phase::WristCycles}) {
    if (name == phase_name(p)) return p;
  }
  throw ConfigError("unknown task phase: " + name);
}

int phase_joint(Phase phase) {
  switch (phase) {
    case Phase::ShoulderRight:
    case Phase::ShoulderLeft: return kShoulder;
    case Phase::ElbowCycles: return kElbow;
    case Phase::WristCycles: return kWrist;
  }
  return kShoulder;
}

UserScript::UserScript(ScriptConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
  if (config_.pattern.empty()) throw ConfigError("task pattern is empty");
  if (config_.min_cycles < 1 || config_.max_cycles < config_.min_cycles) throw ConfigError("bad cycle range");
  if (config_.switch_burst_len < 1) throw ConfigError("switch_burst_len must be >= 1");
  if (config_.precursor_ticks < 0 || config_.inter_cue_gap < 0) throw ConfigError("negative cue timing");
  if (!(config_.min_contraction > 0.0 && config_.max_contraction <= 1.0 &&
        config_.min_contraction <= config_.max_contraction)) {
    throw ConfigError("bad contraction range");
  }
  enter_phase(0);
  pause_ = rng_.uniform_int(config_.min_reaction_ticks, config_.max_reaction_ticks);
}

void UserScript::enter_phase(std::size_t index) {
  phase_index_ = index;
  going_up_ = true;
  cycles_remaining_ = 0;
  const Phase p = phase();
  if (p == Phase::ElbowCycles || p == Phase::WristCycles) {
    cycles_remaining_ = rng_.uniform_int(config_.min_cycles, config_.max_cycles);
  }
  level_ = config_.min_contraction + (config_.max_contraction - config_.min_contraction) * rng_.uniform();
}

void UserScript::complete_phase() {
  ++phases_completed_;
  const std::size_t next = (phase_index_ + 1) % config_.pattern.size();
  if (next == 0) ++laps_;
  enter_phase(next);
  pause_ = rng_.uniform_int(config_.min_decision_ticks, config_.max_decision_ticks);
}

UserAction UserScript::move_toward(const ArmState& arm) {
  UserAction act;
  const int j = arm.active_joint;
  const double pos = arm.pos[j];
  double goal = 0.0;
  bool positive = true;
  switch (phase()) {
    case Phase::ShoulderRight:
      goal = config_.shoulder_right_goal;
      positive = true;
      break;
    case Phase::ShoulderLeft:
      goal = config_.shoulder_left_goal;
      positive = false;
      break;
    case Phase::ElbowCycles:
    case Phase::WristCycles:
      goal = going_up_ ? config_.cycle_high : config_.cycle_low;
      positive = going_up_;
      break;
  }
  const bool reached = positive ? pos >= goal : pos <= goal;
  if (reached) {
    if (phase() == Phase::ShoulderRight || phase() == Phase::ShoulderLeft) {
      complete_phase();
      return act;
    }
    if (going_up_) {
      going_up_ = false;
    } else {
      going_up_ = true;
      if (--cycles_remaining_ <= 0) {
        complete_phase();
        return act;
      }
    }
    pause_ = rng_.uniform_int(0, config_.max_dwell_ticks);
    level_ = config_.min_contraction + (config_.max_contraction - config_.min_contraction) * rng_.uniform();
    return act;
  }
  act.contraction[positive ? 0 : 1] = level_;
  return act;
}

UserAction UserScript::step(const ArmState& arm) {
  UserAction act;
  const int want = desired_joint();
  const bool joint_changed = arm.active_joint != last_active_;
  last_active_ = arm.active_joint;

  if (cue_ == Cue::Ramp && arm.active_joint == want) {
    // Someone else made the switch for us.
    cue_ = Cue::Idle;
  }
  if (cue_ == Cue::Ramp) {
    act.contraction[2] = static_cast<double>(cue_tick_ + 1) / static_cast<double>(config_.precursor_ticks);
    if (++cue_tick_ >= config_.precursor_ticks) {
      cue_ = Cue::Burst;
      cue_tick_ = 0;
    }
    return act;
  }
  if (cue_ == Cue::Burst) {
    act.contraction[2] = 1.0;
    act.switch_intent = true;
    if (++cue_tick_ >= config_.switch_burst_len) {
      cue_ = config_.inter_cue_gap > 0 ? Cue::Gap : Cue::Idle;
      cue_tick_ = 0;
    }
    return act;
  }
  if (cue_ == Cue::Gap) {
    if (++cue_tick_ >= config_.inter_cue_gap) {
      cue_ = Cue::Idle;
      cue_tick_ = 0;
    }
    return act;
  }

  if (arm.active_joint != want) {
    if (joint_changed && first_cue_ && pause_ == 0) {
      // Unexpected switch while working: take a moment before correcting.
      pause_ = rng_.uniform_int(config_.min_reaction_ticks, config_.max_reaction_ticks);
    }
    if (pause_ > 0) {
      --pause_;
      return act;
    }
    if (first_cue_ && config_.precursor_ticks > 0) {
      cue_ = Cue::Ramp;
    } else {
      cue_ = Cue::Burst;
    }
    first_cue_ = false;
    cue_tick_ = 0;
    return step(arm);
  }

  if (!first_cue_) {
    // Just arrived on the wanted joint.
    first_cue_ = true;
    pause_ = rng_.uniform_int(config_.min_reaction_ticks, config_.max_reaction_ticks);
  }
  if (pause_ > 0) {
    --pause_;
    return act;
  }
  return move_toward(arm);
}

std::int64_t UserScript::lap_tick_bound(const ScriptConfig& config, const ArmConfig& arm, double min_drive_fraction) {
  double slowest_gain = arm.gains[0];
  for (double g : arm.gains) slowest_gain = std::min(slowest_gain, g);
  const double speed = slowest_gain * config.min_contraction * min_drive_fraction;
  const auto segment = static_cast<std::int64_t>(std::ceil(1.0 / (speed * arm.dt))) + config.max_dwell_ticks + 3;
  const std::int64_t cue = config.precursor_ticks + config.switch_burst_len + config.inter_cue_gap;
  std::int64_t total = 0;
  for (Phase p : config.pattern) {
    const bool cycles = p == Phase::ElbowCycles || p == Phase::WristCycles;
    total += (cycles ? 2 * config.max_cycles : 1) * segment;
    total += config.max_decision_ticks + 2 * config.max_reaction_ticks + (kNumJoints - 1) * cue;
  }
  return total;
}

JointArray synth_emg(const JointArray& contraction, const EmgSynthConfig& config, Rng& rng) {
  JointArray emg{};
  for (int i = 0; i < kNumJoints; ++i) {
    const double s = rng.normal();
    const double m = rng.normal();
    const double n = rng.normal();
    emg[i] = contraction[i] * (config.burst_gain * s + config.noise_sigma * m) + config.baseline_sigma * n;
  }
  return emg;
}

}  // namespace gvfswitch
