#include "gvfswitch/horde.hpp"

#include <algorithm>
#include <cstring>
#include <set>

namespace gvfswitch {

const LearnerParams& HordeConfig::params_for(const std::string& id) const {
  const auto it = overrides.find(id);
  return it == overrides.end() ? defaults : it->second;
}

std::string joint_question_id(int joint) { return std::string("joint_") + joint_name(joint); }

std::vector<GvfQuestion> build_default_questions(int timescale) {
  std::vector<GvfQuestion> qs;
  qs.push_back(make_question(kSwitchQuestion, "switch_pulse", timescale));
  for (int j = 0; j < kNumJoints; ++j) {
    qs.push_back(make_question(joint_question_id(j), "joint_speed[" + std::to_string(j) + "]", timescale));
  }
  qs.push_back(make_question("emg_drive", "ch_drive_abs", timescale));
  qs.push_back(make_question("emg_switch", "ch_switch", timescale));
  return qs;
}

void validate_horde_config(const HordeConfig& config) {
  std::set<std::string> ids;
  for (const auto& q : config.questions) {
    if (!ids.insert(q.id).second) throw ConfigError("duplicate question id: " + q.id);
    if (q.timescale < 1) throw ConfigError("timescale must be >= 1 for question " + q.id);
    SignalSelector::parse(q.cumulant);
  }
  validate_params(config.defaults);
  for (const auto& [id, p] : config.overrides) {
    if (!ids.count(id)) throw ConfigError("learner override for unknown question: " + id);
    validate_params(p);
  }
}

namespace kernels {

namespace {

inline LearnerTick advance_one(GvfLearner& learner, const FeatureVector* prev, const FeatureVector& x,
                               double cumulant) {
  LearnerTick t;
  t.prediction = learner.predict(x);
  if (prev != nullptr) t.delta = learner.update(*prev, cumulant, x);
  return t;
}

}  // namespace

void advance_serial(std::span<GvfLearner> learners, const FeatureVector* prev, const FeatureVector& x,
                    std::span<const double> cumulants, std::span<LearnerTick> out, UpdateOrder order) {
  const std::size_t n = learners.size();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order == UpdateOrder::Forward ? k : n - 1 - k;
    out[i] = advance_one(learners[i], prev, x, cumulants[i]);
  }
}

void advance_parallel(std::span<GvfLearner> learners, const FeatureVector* prev, const FeatureVector& x,
                      std::span<const double> cumulants, std::span<LearnerTick> out) {
  const auto n = static_cast<std::ptrdiff_t>(learners.size());
  std::vector<std::exception_ptr> errors(learners.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = advance_one(learners[static_cast<std::size_t>(i)], prev, x,
                                                     cumulants[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace kernels

Horde::Horde(HordeConfig config, TileCoder coder, double velocity_max, HordeOptions options)
    : config_(std::move(config)), coder_(std::move(coder)), velocity_max_(velocity_max), options_(options) {
  validate_horde_config(config_);
  const std::size_t nq = config_.questions.size();
  const std::size_t nf = coder_.num_features();
  if (nq > 0) {
    arena_.reset(static_cast<double*>(std::calloc(nq * nf, sizeof(double))));
    if (!arena_) throw std::bad_alloc();
  }
  const int active = coder_.active_count();
  learners_.reserve(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    std::size_t slot = q;
    if (options_.alias_weights && options_.alias_weights->second == q) slot = options_.alias_weights->first;
    std::span<double> w(arena_.get() + slot * nf, nf);
    const auto& question = config_.questions[q];
    learners_.emplace_back(question, config_.params_for(question.id), w, active);
    cumulants_.push_back(SignalSelector::parse(question.cumulant));
    verifiers_.emplace_back(question.gamma());
  }
  cumulant_buf_.resize(nq);
  tick_buf_.resize(nq);
}

void Horde::set_options(const HordeOptions& options) {
  if (options.alias_weights != options_.alias_weights) throw ConfigError("weight aliasing is fixed at construction");
  options_ = options;
}

HordeSnapshot Horde::step(const TimeStepSample& sample, const ProcessedSignals& processed,
                          const StateVector& state) {
  prev_x_.active.swap(x_.active);
  prev_x_.num_features_total = x_.num_features_total;
  x_ = coder_.encode(state);
  ++encode_count_;

  const std::size_t nq = learners_.size();
  for (std::size_t q = 0; q < nq; ++q) cumulant_buf_[q] = cumulants_[q].value(sample, processed, velocity_max_);

  const FeatureVector* prev = (learning_ && has_prev_) ? &prev_x_ : nullptr;
  const bool parallel = options_.schedule == Schedule::Parallel &&
                        static_cast<int>(nq) >= options_.parallel_min_learners;
  if (parallel) {
    kernels::advance_parallel(learners_, prev, x_, cumulant_buf_, tick_buf_);
  } else {
    kernels::advance_serial(learners_, prev, x_, cumulant_buf_, tick_buf_, options_.order);
  }
  has_prev_ = true;

  HordeSnapshot snap;
  snap.step = sample.step;
  snap.questions.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    auto& qs = snap.questions[q];
    qs.prediction = tick_buf_[q].prediction;
    qs.normalized = normalize_prediction(qs.prediction, learners_[q].gamma());
    qs.delta = tick_buf_[q].delta;
    qs.cumulant = cumulant_buf_[q];
    qs.matured = verifiers_[q].observe(sample.step, qs.prediction, qs.cumulant);
  }
  return snap;
}

void Horde::reset_episode() {
  has_prev_ = false;
  x_.active.clear();
  prev_x_.active.clear();
  for (auto& l : learners_) l.reset_trace();
  for (auto& v : verifiers_) v.reset();
}

std::vector<std::vector<MaturedReturn>> Horde::finish_verifiers(bool pad) {
  std::vector<std::vector<MaturedReturn>> out;
  for (auto& v : verifiers_) out.push_back(v.finish(pad));
  return out;
}

void Horde::load_weights(std::size_t i, std::span<const double> w) {
  auto dst = learners_.at(i).weights();
  if (w.size() != dst.size()) {
    throw ConfigError("weight vector for '" + config_.questions[i].id + "' has " + std::to_string(w.size()) +
                      " entries, expected " + std::to_string(dst.size()));
  }
  std::copy(w.begin(), w.end(), dst.begin());
}

std::size_t Horde::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < config_.questions.size(); ++i) {
    if (config_.questions[i].id == id) return i;
  }
  throw ConfigError("no question with id " + id);
}

bool reorder_invariance_check(const std::function<Horde(UpdateOrder)>& make_horde,
                              const std::vector<TickInput>& stream) {
  Horde forward = make_horde(UpdateOrder::Forward);
  Horde reverse = make_horde(UpdateOrder::Reverse);
  for (const auto& t : stream) {
    forward.step(t.sample, t.processed, t.state);
    reverse.step(t.sample, t.processed, t.state);
  }
  if (forward.size() != reverse.size()) return false;
  for (std::size_t q = 0; q < forward.size(); ++q) {
    const auto a = forward.weights(q);
    const auto b = reverse.weights(q);
    if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace gvfswitch
