#include "gvfswitch/signal_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gvfswitch {

namespace {

std::string indexed(const char* base, int i) { return std::string(base) + "[" + std::to_string(i) + "]"; }

// Parses "name[i]" into (name, i); returns -1 when there is no index.
std::pair<std::string, int> split_index(const std::string& text) {
  const auto open = text.find('[');
  if (open == std::string::npos) return {text, -1};
  if (text.back() != ']') throw ConfigError("malformed signal name: " + text);
  const std::string digits = text.substr(open + 1, text.size() - open - 2);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError("malformed signal index: " + text);
  }
  return {text.substr(0, open), std::stoi(digits)};
}

std::string format_decay(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", beta);
  return buf;
}

}  // namespace

void validate_sample(const TimeStepSample& s, double tick_rate_hz) {
  if (s.step < 0) throw ConfigError("sample step is negative");
  if (std::abs(s.time_s - static_cast<double>(s.step) / tick_rate_hz) > 1e-9) {
    throw ConfigError("sample time_s disagrees with step at tick " + std::to_string(s.step));
  }
  for (int j = 0; j < kNumJoints; ++j) {
    if (!(s.joint_pos[j] >= 0.0 && s.joint_pos[j] <= 1.0)) {
      throw ConfigError("joint_pos out of [0,1] at tick " + std::to_string(s.step));
    }
    if (!std::isfinite(s.joint_vel[j]) || !std::isfinite(s.emg_raw[j])) {
      throw ConfigError("non-finite sample field at tick " + std::to_string(s.step));
    }
  }
  if (s.switch_pulse != 0 && s.switch_pulse != 1) throw ConfigError("switch_pulse must be 0 or 1");
  if (s.active_joint < 0 || s.active_joint >= kNumJoints) throw ConfigError("active_joint out of range");
}

SignalSelector SignalSelector::parse(const std::string& name) {
  const auto [base, idx] = split_index(name);
  auto scalar = [&](Kind kind) {
    if (idx != -1) throw ConfigError("signal takes no index: " + name);
    return SignalSelector(name, kind, 0);
  };
  auto per_joint = [&](Kind kind) {
    if (idx < 0 || idx >= kNumJoints) throw ConfigError("signal needs a joint index 0..3: " + name);
    return SignalSelector(name, kind, idx);
  };
  if (base == "switch_pulse") return scalar(Kind::SwitchPulse);
  if (base == "ch_drive") return scalar(Kind::ChDrive);
  if (base == "ch_drive_abs") return scalar(Kind::ChDriveAbs);
  if (base == "ch_switch") return scalar(Kind::ChSwitch);
  if (base == "constant") return scalar(Kind::Constant);
  if (base == "emg_mav") return per_joint(Kind::EmgMav);
  if (base == "joint_speed") return per_joint(Kind::JointSpeed);
  if (base == "joint_moving") return per_joint(Kind::JointMoving);
  throw ConfigError("unknown signal selector: " + name);
}

double SignalSelector::value(const TimeStepSample& sample, const ProcessedSignals& processed,
                             double velocity_max) const {
  switch (kind_) {
    case Kind::SwitchPulse: return static_cast<double>(sample.switch_pulse);
    case Kind::ChDrive: return processed.ch_drive;
    case Kind::ChDriveAbs: return std::abs(processed.ch_drive);
    case Kind::ChSwitch: return processed.ch_switch;
    case Kind::EmgMav: return std::min(processed.emg_mav[index_], 1.0);
    case Kind::JointSpeed: return std::min(std::abs(sample.joint_vel[index_]) / velocity_max, 1.0);
    case Kind::JointMoving: return std::abs(sample.joint_vel[index_]) > 1e-3 ? 1.0 : 0.0;
    case Kind::Constant: return 1.0;
  }
  return 0.0;
}

TraceBank::TraceBank(std::vector<double> decay_rates, std::vector<std::string> tracked_signals)
    : decay_rates_(std::move(decay_rates)), tracked_(std::move(tracked_signals)),
      traces_(decay_rates_.size() * tracked_.size(), 0.0) {
  for (double beta : decay_rates_) {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("trace decay must lie in [0,1)");
  }
}

void TraceBank::update(const std::vector<double>& inputs) {
  if (inputs.size() != tracked_.size()) throw ConfigError("trace input count mismatch");
  const std::size_t nd = decay_rates_.size();
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    for (std::size_t d = 0; d < nd; ++d) {
      const double beta = decay_rates_[d];
      double& tr = traces_[s * nd + d];
      tr = beta * tr + (1.0 - beta) * inputs[s];
    }
  }
}

void TraceBank::reset() { std::fill(traces_.begin(), traces_.end(), 0.0); }

int layout_index(const StateLayout& layout, const std::string& name) {
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("state layout has no dimension named " + name);
}

SignalPipeline::SignalPipeline(PipelineConfig config)
    : config_(std::move(config)), bank_(config_.trace_decays, config_.traced_signals) {
  if (config_.mav_window < 1) throw ConfigError("mav_window must be >= 1");
  if (!(config_.drive_max > 0 && config_.switch_max > 0 && config_.velocity_max > 0)) {
    throw ConfigError("normalization constants must be positive");
  }
  for (const auto& name : config_.traced_signals) traced_.push_back(SignalSelector::parse(name));
  window_.assign(static_cast<std::size_t>(config_.mav_window), JointArray{});

  auto layout = std::make_shared<StateLayout>();
  for (int j = 0; j < kNumJoints; ++j) layout->push_back({indexed("joint_pos", j), 0.0, 1.0});
  for (int j = 0; j < kNumJoints; ++j) layout->push_back({indexed("joint_vel", j), 0.0, 1.0});
  layout->push_back({"ch_drive", -1.0, 1.0});
  layout->push_back({"ch_switch", 0.0, 1.0});
  layout->push_back({"switch_pulse", 0.0, 1.0});
  for (int j = 0; j < kNumJoints; ++j) layout->push_back({indexed("active_joint", j), 0.0, 1.0});
  for (const auto& sel : traced_) {
    for (double beta : config_.trace_decays) {
      layout->push_back({"trace:" + sel.name() + "@" + format_decay(beta), sel.lo(), sel.hi()});
    }
  }
  layout_ = std::move(layout);
}

ProcessedSignals SignalPipeline::process(const TimeStepSample& sample) {
  JointArray& slot = window_[head_];
  for (int i = 0; i < kNumJoints; ++i) slot[i] = std::abs(sample.emg_raw[i]);
  head_ = (head_ + 1) % window_.size();

  ProcessedSignals out;
  const double w = static_cast<double>(window_.size());
  for (int i = 0; i < kNumJoints; ++i) {
    double sum = 0.0;
    for (const auto& row : window_) sum += row[i];
    out.emg_mav[i] = sum / w;
  }
  out.ch_drive = std::clamp((out.emg_mav[0] - out.emg_mav[1]) / config_.drive_max, -1.0, 1.0);
  out.ch_switch = std::clamp(out.emg_mav[2] / config_.switch_max, 0.0, 1.0);
  return out;
}

void SignalPipeline::update_traces(const ProcessedSignals& processed, const TimeStepSample& sample) {
  std::vector<double> inputs;
  inputs.reserve(traced_.size());
  for (const auto& sel : traced_) inputs.push_back(sel.value(sample, processed, config_.velocity_max));
  bank_.update(inputs);
}

StateVector SignalPipeline::build_state_vector(const TimeStepSample& sample,
                                               const ProcessedSignals& processed) const {
  StateVector sv;
  sv.layout = layout_;
  auto& v = sv.values;
  v.reserve(layout_->size());
  for (int j = 0; j < kNumJoints; ++j) v.push_back(sample.joint_pos[j]);
  const double vmax = config_.velocity_max;
  for (int j = 0; j < kNumJoints; ++j) {
    const double clipped = std::clamp(sample.joint_vel[j], -vmax, vmax);
    v.push_back((clipped + vmax) / (2.0 * vmax));
  }
  v.push_back(processed.ch_drive);
  v.push_back(processed.ch_switch);
  v.push_back(static_cast<double>(sample.switch_pulse));
  for (int j = 0; j < kNumJoints; ++j) v.push_back(sample.active_joint == j ? 1.0 : 0.0);
  const auto& traces = bank_.flattened();
  v.insert(v.end(), traces.begin(), traces.end());
  if (v.size() != layout_->size()) {
    throw ConfigError("state vector length " + std::to_string(v.size()) + " disagrees with layout length " +
                      std::to_string(layout_->size()));
  }
  return sv;
}

SignalPipeline::Output SignalPipeline::step(const TimeStepSample& sample) {
  Output out;
  out.processed = process(sample);
  update_traces(out.processed, sample);
  out.state = build_state_vector(sample, out.processed);
  return out;
}

void SignalPipeline::reset() {
  for (auto& row : window_) row.fill(0.0);
  head_ = 0;
  bank_.reset();
}

}  // namespace gvfswitch
