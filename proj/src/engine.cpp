#include "gvfswitch/engine.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace gvfswitch {

void LatencyHistogram::add(double ms) {
  const double b = ms / kBucketMs;
  const std::size_t idx = b >= static_cast<double>(kBuckets) ? kBuckets : static_cast<std::size_t>(b);
  ++buckets_[idx];
  ++count_;
  sum_ += ms;
  max_ = std::max(max_, ms);
}

double LatencyHistogram::quantile_ms(double q) const {
  if (count_ == 0) return 0.0;
  const auto target = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(count_)));
  std::int64_t seen = 0;
  for (std::size_t i = 0; i <= kBuckets; ++i) {
    seen += buckets_[i];
    if (seen >= target) return i == kBuckets ? max_ : std::min(max_, static_cast<double>(i + 1) * kBucketMs);
  }
  return max_;
}

void LatencyHistogram::reset() {
  std::fill(buckets_.begin(), buckets_.end(), 0u);
  count_ = 0;
  sum_ = 0.0;
  max_ = 0.0;
}

Engine::Engine(EngineConfig config, HordeOptions horde_options)
    : config_((validate_config(config), std::move(config))),
      hash_(gvfswitch::config_hash(config_)),
      pipeline_(config_.pipeline),
      horde_(make_horde(config_, horde_options)),
      advisor_(config_.advisor),
      script_(config_.script, derive_seed(config_.seed, 1)),
      emg_rng_(derive_seed(config_.seed, 2)),
      arm_(initial_arm_state(config_.arm)) {
  horde_.set_learning(config_.learning);
  for (const auto& q : config_.horde.questions) question_ids_.push_back(q.id);
  switch_q_ = horde_.index_of(kSwitchQuestion);
  for (int j = 0; j < kNumJoints; ++j) joint_q_[j] = horde_.index_of(joint_question_id(j));
}

void Engine::set_replay(std::vector<TimeStepSample> samples) {
  if (config_.mode != RunMode::Replay) throw ConfigError("replay samples need run mode 'replay'");
  replay_ = std::move(samples);
  replay_pos_ = 0;
}

bool Engine::finished() const { return config_.mode == RunMode::Replay && replay_pos_ >= replay_.size(); }

void Engine::load_model(const ModelFile& model, bool allow_mismatch) {
  if (model.config_hash != hash_ && !allow_mismatch) {
    throw ConfigError("model config hash " + hash_hex(model.config_hash) + " does not match engine config hash " +
                      hash_hex(hash_));
  }
  load_model_into(horde_, model);
}

ModelFile Engine::model() const { return model_from_horde(horde_, hash_); }

SessionLogHeader Engine::log_header() const {
  SessionLogHeader h;
  h.config_hash = hash_;
  h.question_ids = question_ids_;
  h.config_json = config_to_json(config_).dump();
  return h;
}

void Engine::open_log(const std::string& path) { log_ = std::make_unique<SessionLogWriter>(path, log_header()); }

void Engine::close_log() {
  if (log_) {
    log_->close();
    log_.reset();
  }
}

std::string Engine::handle_command(const Command& c) {
  const char* name = command_name(c.kind);
  const bool piloted = config_.mode == RunMode::Piloted;
  try {
    switch (c.kind) {
      case CommandKind::Drive:
        if (!piloted) return error_message(name, "mode conflict: drive needs piloted mode", c.id);
        if (!(c.value >= -1.0 && c.value <= 1.0)) return error_message(name, "out of range", c.id);
        pilot_drive_ = c.value;
        break;
      case CommandKind::Switch:
        if (!piloted) return error_message(name, "mode conflict: switch needs piloted mode", c.id);
        ++pilot_burst_;
        break;
      case CommandKind::SetAutonomy:
        advisor_.set_autonomy(c.autonomy);
        break;
      case CommandKind::ToggleLearning:
        horde_.set_learning(c.on);
        break;
      case CommandKind::SaveModel:
        save_model(c.path, model());
        break;
    }
  } catch (const std::exception& e) {
    return error_message(name, e.what(), c.id);
  }
  return ack_message(c, step_);
}

UserAction Engine::pilot_action() {
  // A queued switch is one cue: burst ticks on, then gap ticks off.
  UserAction act;
  if (pilot_drive_ > 0) act.contraction[0] = pilot_drive_;
  if (pilot_drive_ < 0) act.contraction[1] = -pilot_drive_;
  const int burst = config_.script.switch_burst_len;
  const int cue_len = burst + config_.script.inter_cue_gap;
  if (pilot_burst_ > 0) {
    if (pilot_cue_tick_ < burst) {
      act.contraction[2] = 1.0;
      act.switch_intent = true;
    }
    if (++pilot_cue_tick_ >= cue_len) {
      pilot_cue_tick_ = 0;
      --pilot_burst_;
    }
  }
  return act;
}

TimeStepSample Engine::next_sample(UserAction& action) {
  if (config_.mode == RunMode::Replay) {
    if (replay_pos_ >= replay_.size()) throw ConfigError("replay exhausted");
    TimeStepSample s = replay_[replay_pos_++];
    s.step = step_;
    return s;
  }
  action = config_.mode == RunMode::Piloted ? pilot_action() : script_.step(arm_);
  TimeStepSample s;
  s.step = step_;
  s.time_s = static_cast<double>(step_) / config_.tick_rate_hz;
  s.emg_raw = synth_emg(action.contraction, config_.emg, emg_rng_);
  s.joint_pos = arm_.pos;
  s.joint_vel = arm_.vel;
  s.switch_pulse = action.switch_intent ? 1 : 0;
  s.active_joint = arm_.active_joint;
  return s;
}

const TickOutput& Engine::tick() {
  out_.events.clear();
  out_.messages.clear();

  // read commands
  for (const auto& c : pending_) out_.messages.push_back({c.client, handle_command(c), false});
  pending_.clear();

  // user or pilot input, synth EMG, sample
  UserAction action;
  const TimeStepSample sample = next_sample(action);

  const auto t0 = std::chrono::steady_clock::now();
  const auto piped = pipeline_.step(sample);
  HordeSnapshot snap = horde_.step(sample, piped.processed, piped.state);
  JointArray activity{};
  for (int j = 0; j < kNumJoints; ++j) activity[j] = snap.questions[joint_q_[j]].normalized;
  const bool rising = sample.switch_pulse && !prev_pulse_;
  prev_pulse_ = sample.switch_pulse;
  const int current = sample.active_joint;
  const AdvisorTick adv = advisor_.step(step_, snap.questions[switch_q_].normalized, activity, rising, current,
                                        std::abs(sample.joint_vel[current]));
  const auto t1 = std::chrono::steady_clock::now();
  out_.core_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  timing_.add(out_.core_ms);

  SessionLogRecord& rec = out_.record;
  rec.sample = sample;
  rec.processed = piped.processed;
  rec.predictions.resize(snap.questions.size());
  rec.matured.clear();
  for (std::size_t q = 0; q < snap.questions.size(); ++q) {
    rec.predictions[q] = {snap.questions[q].prediction, snap.questions[q].normalized};
    if (snap.questions[q].matured) rec.matured.push_back({static_cast<int>(q), *snap.questions[q].matured});
  }
  rec.advisor = adv.output;
  rec.autonomy = advisor_.autonomy();
  rec.source = SwitchSource::None;
  rec.switched_to.reset();
  rec.config_hash = hash_;

  if (adv.alarm_rose) out_.events.push_back({EngineEvent::Kind::AlarmRise, step_, current, current, SwitchSource::None});

  // arm actuation
  if (config_.mode != RunMode::Replay) {
    arm_ = arm_step(arm_, piped.processed.ch_drive, config_.arm);
    if (adv.decision.target && *adv.decision.target != arm_.active_joint) {
      const int target = *adv.decision.target;
      const bool is_auto = adv.decision.action == SwitchAction::AutoSwitch;
      if (!is_auto && last_auto_switch_ && step_ - *last_auto_switch_ <= config_.advisor.refractory_ticks) {
        out_.events.push_back({EngineEvent::Kind::Override, step_, current, target, SwitchSource::User});
      }
      arm_ = switch_mode(arm_, target);
      rec.source = is_auto ? SwitchSource::Auto : SwitchSource::User;
      rec.switched_to = target;
      if (is_auto) last_auto_switch_ = step_;
      out_.events.push_back({EngineEvent::Kind::Switch, step_, current, target, rec.source});
    }
  }

  // log
  if (log_) log_->write(rec);
  if (capture_) captured_.push_back(rec);

  // telemetry
  for (const auto& e : out_.events) out_.messages.push_back({0, event_message(e), false});
  if (telemetry_) out_.messages.push_back({0, state_message(rec, question_ids_, horde_.learning()), true});

  ++step_;
  return out_;
}

LoopStats run_loop(Engine& engine, const LoopOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / engine.config().tick_rate_hz));
  LoopStats stats;
  const auto start = clock::now();
  auto deadline = start + period;
  try {
    while (true) {
      if (options.max_ticks >= 0 && stats.ticks >= options.max_ticks) break;
      if (options.stop && options.stop->load()) break;
      if (engine.finished()) break;
      const auto tick_start = clock::now();
      if (options.commands) {
        for (auto& c : options.commands->drain()) engine.submit(std::move(c));
      }
      const TickOutput& out = engine.tick();
      if (options.on_tick) options.on_tick(out);
      ++stats.ticks;
      if (options.paced) {
        const auto now = clock::now();
        if (now - tick_start > period || now > deadline) {
          ++stats.overruns;
          deadline = now + period;
        } else {
          std::this_thread::sleep_until(deadline);
          deadline += period;
        }
      }
    }
  } catch (...) {
    engine.close_log();
    throw;
  }
  engine.close_log();
  stats.wall_s = std::chrono::duration<double>(clock::now() - start).count();
  const auto& t = engine.core_timing();
  stats.core_mean_ms = t.mean_ms();
  stats.core_p99_ms = t.quantile_ms(0.99);
  stats.core_max_ms = t.max_ms();
  return stats;
}

SessionLog simulate_session(const EngineConfig& config, std::int64_t ticks) {
  Engine engine(config);
  engine.set_telemetry(false);
  engine.capture(true);
  LoopOptions opt;
  opt.max_ticks = ticks;
  run_loop(engine, opt);
  SessionLog log;
  log.header = engine.log_header();
  log.records = engine.captured();
  return log;
}

}  // namespace gvfswitch
