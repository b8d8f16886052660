#ifndef GVFSWITCH_HORDE_HPP
#define GVFSWITCH_HORDE_HPP

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvfswitch/gvf.hpp"
#include "gvfswitch/signal_pipeline.hpp"
#include "gvfswitch/tile_coder.hpp"

namespace gvfswitch {

struct HordeConfig {
  std::vector<GvfQuestion> questions;
  LearnerParams defaults;
  std::map<std::string, LearnerParams> overrides;

  const LearnerParams& params_for(const std::string& id) const;
};

/// Question ids of the default set, in order.
inline constexpr const char* kSwitchQuestion = "switch";
std::string joint_question_id(int joint);

/// switch-event, joint activity x4, |ch_drive| and ch_switch; all at timescale T.
std::vector<GvfQuestion> build_default_questions(int timescale = 10);

/// Throws ConfigError on duplicate ids or unresolvable cumulants.
void validate_horde_config(const HordeConfig& config);

struct QuestionSnapshot {
  double prediction = 0.0;
  double normalized = 0.0;
  double delta = 0.0;
  double cumulant = 0.0;
  std::optional<MaturedReturn> matured;
};

struct HordeSnapshot {
  std::int64_t step = 0;
  std::vector<QuestionSnapshot> questions;
};

enum class Schedule { Serial, Parallel };
enum class UpdateOrder { Forward, Reverse };

struct HordeOptions {
  Schedule schedule = Schedule::Parallel;
  UpdateOrder order = UpdateOrder::Forward;
  // Minimum learner count before the parallel kernel forks.
  int parallel_min_learners = 16;
  // Fault injection only: learner `second` reuses learner `first`'s weights.
  std::optional<std::pair<std::size_t, std::size_t>> alias_weights;
};

namespace kernels {

struct LearnerTick {
  double prediction = 0.0;
  double delta = 0.0;
};

/// Per-learner predict(x) then, when `prev` is set, update(prev, c, x).
/// Reference implementation: one learner after another in `order`.
void advance_serial(std::span<GvfLearner> learners, const FeatureVector* prev, const FeatureVector& x,
                    std::span<const double> cumulants, std::span<LearnerTick> out, UpdateOrder order);

/// Same contract with learners fanned out over OpenMP threads; joins before
/// returning. The lowest-index divergence is rethrown after the join.
void advance_parallel(std::span<GvfLearner> learners, const FeatureVector* prev, const FeatureVector& x,
                      std::span<const double> cumulants, std::span<LearnerTick> out);

}  // namespace kernels

/// Bank of GVF learners advanced in lockstep over one shared feature vector.
class Horde {
 public:
  Horde(HordeConfig config, TileCoder coder, double velocity_max, HordeOptions options = {});

  /// Encodes x_t once, predicts every question on x_t, then (when learning and
  /// a previous tick exists) updates each learner from x_{t-1} with the
  /// cumulant observed this tick, and feeds the verifiers.
  HordeSnapshot step(const TimeStepSample& sample, const ProcessedSignals& processed, const StateVector& state);

  void set_learning(bool enabled) { learning_ = enabled; }
  bool learning() const { return learning_; }
  void set_options(const HordeOptions& options);

  /// Forget x_{t-1}, clear eligibility traces and verifier windows.
  void reset_episode();
  /// Flush verifier windows at end of session, per question.
  std::vector<std::vector<MaturedReturn>> finish_verifiers(bool pad);

  std::size_t size() const { return learners_.size(); }
  const HordeConfig& config() const { return config_; }
  const TileCoder& coder() const { return coder_; }
  const GvfLearner& learner(std::size_t i) const { return learners_[i]; }
  std::span<const double> weights(std::size_t i) const { return learners_[i].weights(); }
  void load_weights(std::size_t i, std::span<const double> w);
  std::size_t index_of(const std::string& id) const;

  std::uint64_t encode_count() const { return encode_count_; }
  const FeatureVector& features() const { return x_; }
  bool has_previous() const { return has_prev_; }

 private:
  struct FreeDeleter {
    void operator()(double* p) const { std::free(p); }
  };

  HordeConfig config_;
  TileCoder coder_;
  double velocity_max_;
  HordeOptions options_;
  std::unique_ptr<double, FreeDeleter> arena_;
  std::vector<GvfLearner> learners_;
  std::vector<SignalSelector> cumulants_;
  std::vector<ReturnVerifier> verifiers_;
  FeatureVector x_;
  FeatureVector prev_x_;
  bool has_prev_ = false;
  bool learning_ = true;
  std::uint64_t encode_count_ = 0;
  std::vector<double> cumulant_buf_;
  std::vector<kernels::LearnerTick> tick_buf_;
};

/// One tick of horde input.
struct TickInput {
  TimeStepSample sample;
  ProcessedSignals processed;
  StateVector state;
};

/// True iff running the stream through two hordes built with forward and with
/// reverse learner order leaves every question's weights bit-identical.
bool reorder_invariance_check(const std::function<Horde(UpdateOrder)>& make_horde,
                              const std::vector<TickInput>& stream);

}  // namespace gvfswitch

#endif
