#include "gvfswitch/offline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace gvfswitch {

namespace {

struct ErrorSum {
  double sq = 0.0;
  std::int64_t n = 0;
  void add(const MaturedReturn& m) {
    const double e = m.prediction - m.truncated_return;
    sq += e * e;
    ++n;
  }
};

std::vector<QuestionError> finish_errors(const Horde& horde, const std::vector<ErrorSum>& sums) {
  std::vector<QuestionError> out;
  for (std::size_t q = 0; q < sums.size(); ++q) {
    QuestionError e;
    e.id = horde.config().questions[q].id;
    e.samples = sums[q].n;
    e.rmse = sums[q].n ? std::sqrt(sums[q].sq / static_cast<double>(sums[q].n)) : 0.0;
    out.push_back(e);
  }
  return out;
}

void check_hash(std::uint64_t model_hash, std::uint64_t log_hash, bool allow_mismatch) {
  if (model_hash != log_hash && !allow_mismatch) {
    throw ConfigError("model config hash " + hash_hex(model_hash) + " does not match log config hash " +
                      hash_hex(log_hash));
  }
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - 1;
  const auto idx = std::min(k, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Horde make_horde(const EngineConfig& config, HordeOptions options) {
  SignalPipeline pipeline(config.pipeline);
  TileCoder coder(effective_tiles(config).resolve(pipeline.layout()), pipeline.layout_ptr());
  return Horde(config.horde, std::move(coder), config.pipeline.velocity_max, options);
}

ModelFile model_from_horde(const Horde& horde, std::uint64_t config_hash) {
  ModelFile m;
  m.config_hash = config_hash;
  for (std::size_t q = 0; q < horde.size(); ++q) {
    const auto& question = horde.config().questions[q];
    const auto w = horde.weights(q);
    m.questions.push_back({question.id, question.timescale, horde.learner(q).gamma(), {w.begin(), w.end()}});
  }
  return m;
}

void load_model_into(Horde& horde, const ModelFile& model) {
  for (std::size_t q = 0; q < horde.size(); ++q) {
    const auto& question = horde.config().questions[q];
    const auto it = std::find_if(model.questions.begin(), model.questions.end(),
                                 [&](const ModelQuestion& mq) { return mq.id == question.id; });
    if (it == model.questions.end()) throw ConfigError("model has no weights for question '" + question.id + "'");
    if (it->timescale != question.timescale) {
      throw ConfigError("model timescale for '" + question.id + "' is " + std::to_string(it->timescale) +
                        ", config says " + std::to_string(question.timescale));
    }
    horde.load_weights(q, it->weights);
  }
}

EngineConfig config_from_log(const SessionLog& log) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(log.header.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("log header config is not valid JSON: ") + e.what());
  }
  EngineConfig config = config_from_json(j);
  if (config_hash(config) != log.header.config_hash) {
    throw FormatError("log header config hash does not match its recorded config");
  }
  return config;
}

std::vector<QuestionError> replay_errors(Horde& horde, const EngineConfig& config, const SessionLog& log) {
  SignalPipeline pipeline(config.pipeline);
  horde.reset_episode();
  std::vector<ErrorSum> sums(horde.size());
  for (const auto& rec : log.records) {
    const auto out = pipeline.step(rec.sample);
    HordeSnapshot snap;
    try {
      snap = horde.step(rec.sample, out.processed, out.state);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.question_id(), "tick " + std::to_string(rec.sample.step) + ": " + e.what());
    }
    for (std::size_t q = 0; q < snap.questions.size(); ++q) {
      if (snap.questions[q].matured) sums[q].add(*snap.questions[q].matured);
    }
  }
  return finish_errors(horde, sums);
}

TrainResult train_offline(const SessionLog& log, int passes, const ModelFile* initial) {
  if (passes < 1) throw ConfigError("passes must be >= 1");
  const EngineConfig config = config_from_log(log);
  const std::uint64_t hash = log.header.config_hash;
  Horde horde = make_horde(config);
  if (initial) {
    check_hash(initial->config_hash, hash, false);
    load_model_into(horde, *initial);
  }
  TrainResult result;
  for (int p = 1; p <= passes; ++p) {
    PassStats stats;
    stats.pass = p;
    try {
      horde.set_learning(true);
      stats.online = replay_errors(horde, config, log);
      horde.set_learning(false);
      stats.frozen = replay_errors(horde, config, log);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.question_id(), "pass " + std::to_string(p) + ", " + e.what());
    }
    result.passes.push_back(std::move(stats));
  }
  horde.reset_episode();
  result.model = model_from_horde(horde, hash);
  return result;
}

TrainResult train_offline(const std::string& log_path, int passes) {
  const SessionLog log = read_log(log_path);
  if (log.truncation) throw FormatError(*log.truncation);
  return train_offline(log, passes);
}

EvalReport evaluate(const ModelFile& model, const SessionLog& log, const EvalOptions& options) {
  const EngineConfig config = config_from_log(log);
  check_hash(model.config_hash, log.header.config_hash, options.allow_mismatch);

  Horde horde = make_horde(config);
  load_model_into(horde, model);
  horde.set_learning(options.online);
  SignalPipeline pipeline(config.pipeline);
  AdvisorConfig advisor_config = config.advisor;
  advisor_config.autonomy = Autonomy::Manual;  // replayed decisions are the logged ones
  SwitchAdvisor advisor(advisor_config);

  const std::size_t switch_q = horde.index_of(kSwitchQuestion);
  std::array<std::size_t, kNumJoints> joint_q{};
  for (int j = 0; j < kNumJoints; ++j) joint_q[j] = horde.index_of(joint_question_id(j));

  EvalReport report;
  report.online = options.online;
  std::vector<ErrorSum> sums(horde.size());
  std::vector<std::int64_t> rises, pulses;
  std::vector<std::pair<std::size_t, int>> pulse_suggestions;  // record index, suggested joint
  std::vector<double> durations_ms;
  durations_ms.reserve(log.records.size());
  int prev_pulse = 0;

  using clock = std::chrono::steady_clock;
  const auto wall0 = clock::now();
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& s = log.records[i].sample;
    const auto t0 = clock::now();
    const auto out = pipeline.step(s);
    const auto snap = horde.step(s, out.processed, out.state);
    JointArray activity{};
    for (int j = 0; j < kNumJoints; ++j) activity[j] = snap.questions[joint_q[j]].normalized;
    const bool rising = s.switch_pulse && !prev_pulse;
    prev_pulse = s.switch_pulse;
    const auto tick = advisor.step(s.step, snap.questions[switch_q].normalized, activity, rising, s.active_joint,
                                   std::abs(s.joint_vel[s.active_joint]));
    const auto t1 = clock::now();
    durations_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());

    for (std::size_t q = 0; q < snap.questions.size(); ++q) {
      if (snap.questions[q].matured) sums[q].add(*snap.questions[q].matured);
    }
    if (tick.alarm_rose) rises.push_back(s.step);
    if (rising) {
      pulses.push_back(s.step);
      pulse_suggestions.emplace_back(i, tick.output.suggested_joint);
    }
  }
  report.timing.total_s = std::chrono::duration<double>(clock::now() - wall0).count();

  const double tick_rate = config.tick_rate_hz;
  report.ticks = static_cast<std::int64_t>(log.records.size());
  report.duration_min = static_cast<double>(report.ticks) / tick_rate / 60.0;
  report.switch_pulses = static_cast<std::int64_t>(pulses.size());
  report.alarm_rises = static_cast<std::int64_t>(rises.size());

  const std::int64_t window = options.lead_window > 0 ? options.lead_window
                                                      : static_cast<std::int64_t>(std::llround(tick_rate));
  const LeadAccount acc = lead_time_account(rises, pulses, window);
  report.anticipated = acc.matched_pulses;
  report.false_alarms = acc.false_alarms;
  report.false_alarms_per_min = report.duration_min > 0 ? static_cast<double>(acc.false_alarms) / report.duration_min
                                                        : 0.0;
  if (!pulses.empty()) {
    report.anticipation_rate = static_cast<double>(acc.matched_pulses) / static_cast<double>(pulses.size());
  }
  if (!acc.leads.empty()) {
    std::vector<double> leads(acc.leads.begin(), acc.leads.end());
    report.median_lead_ticks = median(leads);
    report.mean_lead_ticks = std::accumulate(leads.begin(), leads.end(), 0.0) / static_cast<double>(leads.size());
    report.median_lead_ms = *report.median_lead_ticks * 1000.0 / tick_rate;
    report.mean_lead_ms = *report.mean_lead_ticks * 1000.0 / tick_rate;
  }

  // Ground truth for a pulse: the next joint that actually moves.
  const double in_use = config.advisor.in_use_speed;
  for (const auto& [i, suggested] : pulse_suggestions) {
    const int current = log.records[i].sample.active_joint;
    for (std::size_t k = i + 1; k < log.records.size(); ++k) {
      const auto& s = log.records[k].sample;
      if (std::abs(s.joint_vel[s.active_joint]) > in_use) {
        if (s.active_joint != current) {
          ++report.top1_scored;
          if (s.active_joint == suggested) ++report.top1_correct;
        }
        break;
      }
    }
  }
  if (report.top1_scored > 0) {
    report.top1_accuracy = static_cast<double>(report.top1_correct) / static_cast<double>(report.top1_scored);
  }

  report.rmse = finish_errors(horde, sums);
  report.timing.ticks = report.ticks;
  if (!durations_ms.empty()) {
    report.timing.mean_ms = std::accumulate(durations_ms.begin(), durations_ms.end(), 0.0) /
                            static_cast<double>(durations_ms.size());
    report.timing.p99_ms = percentile(durations_ms, 0.99);
    report.timing.max_ms = *std::max_element(durations_ms.begin(), durations_ms.end());
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rmse = json::array();
  for (const auto& e : r.rmse) rmse.push_back({{"id", e.id}, {"rmse", e.rmse}, {"samples", e.samples}});
  return {
      {"ticks", r.ticks},
      {"duration_min", r.duration_min},
      {"online_learning", r.online},
      {"switch_pulses", r.switch_pulses},
      {"alarm_rises", r.alarm_rises},
      {"anticipated_pulses", r.anticipated},
      {"anticipation_rate", opt(r.anticipation_rate)},
      {"lead_ticks", {{"median", opt(r.median_lead_ticks)}, {"mean", opt(r.mean_lead_ticks)}}},
      {"lead_ms", {{"median", opt(r.median_lead_ms)}, {"mean", opt(r.mean_lead_ms)}}},
      {"false_alarms", r.false_alarms},
      {"false_alarms_per_min", r.false_alarms_per_min},
      {"top1", {{"scored", r.top1_scored}, {"correct", r.top1_correct}, {"accuracy", opt(r.top1_accuracy)}}},
      {"rmse", rmse},
      {"timing",
       {{"ticks", r.timing.ticks},
        {"mean_ms", r.timing.mean_ms},
        {"p99_ms", r.timing.p99_ms},
        {"max_ms", r.timing.max_ms},
        {"total_s", r.timing.total_s}}},
  };
}

std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[160];
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-24s %s\n", name, value.c_str());
    os << buf;
  };
  auto num = [](std::optional<double> v, const char* fmt) {
    if (!v) return std::string("n/a");
    char b[64];
    std::snprintf(b, sizeof b, fmt, *v);
    return std::string(b);
  };
  row("ticks", std::to_string(r.ticks));
  row("duration (min)", num(r.duration_min, "%.2f"));
  row("switch pulses", std::to_string(r.switch_pulses));
  row("alarm rises", std::to_string(r.alarm_rises));
  row("anticipation rate", num(r.anticipation_rate, "%.3f"));
  row("lead median (ticks)", num(r.median_lead_ticks, "%.1f"));
  row("lead mean (ms)", num(r.mean_lead_ms, "%.0f"));
  row("false alarms / min", num(r.false_alarms_per_min, "%.2f"));
  row("top-1 accuracy", num(r.top1_accuracy, "%.3f"));
  for (const auto& e : r.rmse) row(("rmse " + e.id).c_str(), num(e.rmse, "%.4f"));
  row("core mean (ms)", num(r.timing.mean_ms, "%.4f"));
  row("core p99 (ms)", num(r.timing.p99_ms, "%.4f"));
  return os.str();
}

}  // namespace gvfswitch
