#ifndef GVFSWITCH_GVF_HPP
#define GVFSWITCH_GVF_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvfswitch/tile_coder.hpp"

namespace gvfswitch {

/// A predictive question: discounted sum of `cumulant` under the user's own
/// behaviour, with gamma = 1 - 1/timescale.
struct GvfQuestion {
  std::string id;
  std::string cumulant;
  int timescale = 10;

  double gamma() const { return 1.0 - 1.0 / static_cast<double>(timescale); }
  bool operator==(const GvfQuestion&) const = default;
};

GvfQuestion make_question(std::string id, std::string cumulant, int timescale);

struct LearnerParams {
  double alpha_base = 0.1;
  double lambda = 0.9;
  bool replacing_traces = false;
  // Trace entries whose magnitude decays below this are dropped.
  double trace_epsilon = 1e-12;

  bool operator==(const LearnerParams&) const = default;
};

void validate_params(const LearnerParams& params);

/// Eligibility trace stored as sorted (index, value) pairs.
class SparseTrace {
 public:
  /// z <- decay * z, then z_i += 1 (or z_i = 1 when replacing) for i in active.
  void decay_and_mark(double decay, std::span<const std::uint32_t> active, bool replacing, double epsilon);
  void clear() {
    index_.clear();
    value_.clear();
  }
  std::size_t size() const { return index_.size(); }
  std::span<const std::uint32_t> indices() const { return index_; }
  std::span<const double> values() const { return value_; }
  double at(std::uint32_t feature) const;

 private:
  std::vector<std::uint32_t> index_;
  std::vector<double> value_;
  std::vector<std::uint32_t> scratch_index_;
  std::vector<double> scratch_value_;
};

/// Sum of w over the active indices.
double sparse_dot(std::span<const double> w, const FeatureVector& x);

/// Linear TD(lambda) learner for one GvfQuestion. Weights either live in the
/// learner or in caller-provided storage (the horde's arena).
class GvfLearner {
 public:
  GvfLearner(GvfQuestion question, LearnerParams params, std::uint32_t num_features, int active_count);
  GvfLearner(GvfQuestion question, LearnerParams params, std::span<double> weights, int active_count);

  GvfLearner(const GvfLearner&) = delete;
  GvfLearner& operator=(const GvfLearner&) = delete;
  GvfLearner(GvfLearner&&) noexcept = default;
  GvfLearner& operator=(GvfLearner&&) noexcept = default;

  double predict(const FeatureVector& x) const;

  /// delta = c_next + gamma * w.x_next - w.x_t; z <- gamma*lambda*z + x_t;
  /// w <- w + alpha * delta * z. Returns delta. Throws DivergenceError when
  /// delta is not finite (weights untouched).
  double update(const FeatureVector& x_t, double c_next, const FeatureVector& x_next);

  /// Same update with a terminal successor (value 0).
  double update_terminal(const FeatureVector& x_t, double c_next);

  /// While a batch is open, weight increments are accumulated and applied in
  /// end_batch(); predictions inside the batch see the pre-batch weights.
  void begin_batch();
  void end_batch();

  void reset_trace() { trace_.clear(); }

  const GvfQuestion& question() const { return question_; }
  const LearnerParams& params() const { return params_; }
  double gamma() const { return gamma_; }
  double alpha() const { return alpha_; }
  std::span<const double> weights() const { return w_; }
  std::span<double> weights() { return w_; }
  const SparseTrace& trace() const { return trace_; }
  double last_prediction() const { return last_prediction_; }
  double last_delta() const { return last_delta_; }
  std::uint32_t num_features() const { return static_cast<std::uint32_t>(w_.size()); }

 private:
  double apply(const FeatureVector& x_t, double delta);
  void check_size(const FeatureVector& x) const;

  GvfQuestion question_;
  LearnerParams params_;
  double gamma_;
  double alpha_;
  std::vector<double> owned_;
  std::span<double> w_;
  SparseTrace trace_;
  mutable double last_prediction_ = 0.0;
  double last_delta_ = 0.0;
  bool in_batch_ = false;
  std::map<std::uint32_t, double> pending_;
};

/// Rescales a return estimate to per-step cumulant units: v * (1 - gamma).
double normalize_prediction(double v, double gamma);

/// K = ceil(ln 0.01 / ln gamma), the first horizon with gamma^K < 0.01
/// (1 when gamma is 0).
int verification_horizon(double gamma);

struct MaturedReturn {
  std::int64_t step = 0;      // tick the prediction was made
  double truncated_return = 0.0;
  double prediction = 0.0;

  bool operator==(const MaturedReturn&) const = default;
};

/// Pairs each prediction with the truncated return sum_{k<K} gamma^k c_{t+k+1}
/// once its window has been observed.
class ReturnVerifier {
 public:
  explicit ReturnVerifier(double gamma);

  /// Record the prediction made at `step` and the cumulant observed at `step`.
  /// Returns the prediction from step - K, matured, when available.
  std::optional<MaturedReturn> observe(std::int64_t step, double prediction, double cumulant);

  /// End of session: zero-pads the outstanding windows when `pad` is true,
  /// otherwise discards them.
  std::vector<MaturedReturn> finish(bool pad);
  void reset();

  double gamma() const { return gamma_; }
  int horizon() const { return horizon_; }

 private:
  double gamma_;
  int horizon_;
  std::vector<double> discounts_;
  // (step, prediction, cumulant at step), oldest first, at most K + 1 entries
  struct Entry {
    std::int64_t step;
    double prediction;
    double cumulant;
  };
  std::deque<Entry> pending_;
};

}  // namespace gvfswitch

#endif
