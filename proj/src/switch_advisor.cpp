#include "gvfswitch/switch_advisor.hpp"

#include <algorithm>
#include <cmath>

namespace gvfswitch {

const char* autonomy_name(Autonomy a) {
  switch (a) {
    case Autonomy::Manual: return "manual";
    case Autonomy::Suggest: return "suggest";
    case Autonomy::Auto: return "auto";
  }
  return "?";
}

Autonomy parse_autonomy(const std::string& name) {
  if (name == "manual") return Autonomy::Manual;
  if (name == "suggest") return Autonomy::Suggest;
  if (name == "auto") return Autonomy::Auto;
  throw ConfigError("unknown autonomy level: " + name);
}

const char* action_name(SwitchAction a) {
  switch (a) {
    case SwitchAction::None: return "none";
    case SwitchAction::ReroutedUserSwitch: return "rerouted";
    case SwitchAction::AutoSwitch: return "auto";
  }
  return "?";
}

SwitchAction parse_action(const std::string& name) {
  if (name == "none") return SwitchAction::None;
  if (name == "rerouted") return SwitchAction::ReroutedUserSwitch;
  if (name == "auto") return SwitchAction::AutoSwitch;
  throw FormatError("unknown switch action: " + name);
}

void validate_advisor_config(const AdvisorConfig& c) {
  if (!(c.theta_off >= 0.0 && c.theta_off < c.theta_on && c.theta_on <= 1.0)) {
    throw ConfigError("advisor thresholds must satisfy 0 <= theta_off < theta_on <= 1");
  }
  if (c.refractory_ticks < 0) throw ConfigError("refractory_ticks must be >= 0");
}

bool TimingDetector::step(std::int64_t tick, double p) {
  rose_ = false;
  if (alarm_) {
    if (p < config_.theta_off) alarm_ = false;
  } else {
    const bool crossed = previous_ < config_.theta_on && p >= config_.theta_on;
    const bool refractory_over = !last_rise_ || tick - *last_rise_ >= config_.refractory_ticks;
    if (crossed && refractory_over) {
      alarm_ = true;
      rose_ = true;
      last_rise_ = tick;
    }
  }
  previous_ = p;
  return alarm_;
}

void TimingDetector::reset() {
  alarm_ = false;
  rose_ = false;
  previous_ = 0.0;
  last_rise_.reset();
}

RankResult rank_joints(const JointArray& predictions, int current, const std::array<bool, kNumJoints>& excluded) {
  RankResult r;
  for (int j = 0; j < kNumJoints; ++j) r.ranking[j] = (current + 1 + j) % kNumJoints;
  std::stable_sort(r.ranking.begin(), r.ranking.end(),
                   [&](int a, int b) { return predictions[a] > predictions[b]; });
  r.suggested_joint = (current + 1) % kNumJoints;
  for (int j : r.ranking) {
    if (j != current && !excluded[j]) {
      r.suggested_joint = j;
      return r;
    }
  }
  // Everything excluded: fall back to the best joint other than current.
  for (int j : r.ranking) {
    if (j != current) {
      r.suggested_joint = j;
      break;
    }
  }
  return r;
}

Decision decide(Autonomy autonomy, bool alarm_rise, int suggested_joint, bool user_pulse, int current) {
  Decision d;
  switch (autonomy) {
    case Autonomy::Manual:
      if (user_pulse) d.target = (current + 1) % kNumJoints;
      break;
    case Autonomy::Suggest:
      if (user_pulse) {
        d.action = SwitchAction::ReroutedUserSwitch;
        d.target = suggested_joint;
      }
      break;
    case Autonomy::Auto:
      if (user_pulse) {
        d.action = SwitchAction::ReroutedUserSwitch;
        d.target = suggested_joint;
      } else if (alarm_rise) {
        d.action = SwitchAction::AutoSwitch;
        d.target = suggested_joint;
      }
      break;
  }
  return d;
}

SwitchAdvisor::SwitchAdvisor(AdvisorConfig config) : config_(config), detector_(config) {
  validate_advisor_config(config_);
}

AdvisorTick SwitchAdvisor::step(std::int64_t tick, double switch_prediction, const JointArray& activity,
                                bool user_pulse, int current, double active_speed) {
  if (active_speed > config_.in_use_speed) left_.fill(false);

  AdvisorTick out;
  out.output.timing_alarm = detector_.step(tick, switch_prediction);
  out.alarm_rose = detector_.rose();
  if (out.output.timing_alarm) out.output.lead_candidate_tick = detector_.last_rise();

  const RankResult ranked = rank_joints(activity, current, left_);
  out.output.ranking = ranked.ranking;
  out.output.suggested_joint = ranked.suggested_joint;

  out.decision = decide(config_.autonomy, out.alarm_rose, ranked.suggested_joint, user_pulse, current);
  out.output.action = out.decision.action;
  if (out.decision.target) left_[current] = true;
  return out;
}

void SwitchAdvisor::reset() {
  detector_.reset();
  left_.fill(false);
}

LeadAccount lead_time_account(const std::vector<std::int64_t>& alarm_rises, const std::vector<std::int64_t>& pulses,
                              std::int64_t window) {
  LeadAccount acc;
  std::vector<bool> alarm_used(alarm_rises.size(), false);
  acc.pulse_matched.assign(pulses.size(), false);
  for (std::size_t p = 0; p < pulses.size(); ++p) {
    const std::int64_t t = pulses[p];
    // nearest rise strictly before t
    const auto it = std::lower_bound(alarm_rises.begin(), alarm_rises.end(), t);
    if (it == alarm_rises.begin()) {
      ++acc.missed_pulses;
      continue;
    }
    const auto idx = static_cast<std::size_t>(std::prev(it) - alarm_rises.begin());
    const std::int64_t lead = t - alarm_rises[idx];
    if (lead > window) {
      ++acc.missed_pulses;
      continue;
    }
    alarm_used[idx] = true;
    acc.pulse_matched[p] = true;
    acc.leads.push_back(lead);
    ++acc.matched_pulses;
  }
  acc.false_alarms = static_cast<std::int64_t>(std::count(alarm_used.begin(), alarm_used.end(), false));
  return acc;
}

}  // namespace gvfswitch
