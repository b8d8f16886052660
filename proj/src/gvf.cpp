#include "gvfswitch/gvf.hpp"

#include <algorithm>
#include <cmath>

namespace gvfswitch {

GvfQuestion make_question(std::string id, std::string cumulant, int timescale) {
  if (timescale < 1) throw ConfigError("timescale must be >= 1 for question " + id);
  SignalSelector::parse(cumulant);
  return GvfQuestion{std::move(id), std::move(cumulant), timescale};
}

void validate_params(const LearnerParams& p) {
  if (!(p.alpha_base > 0.0 && p.alpha_base <= 1.0)) throw ConfigError("alpha_base must lie in (0,1]");
  if (!(p.lambda >= 0.0 && p.lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
  if (!(p.trace_epsilon >= 0.0)) throw ConfigError("trace_epsilon must be >= 0");
}

void SparseTrace::decay_and_mark(double decay, std::span<const std::uint32_t> active, bool replacing,
                                 double epsilon) {
  scratch_index_.clear();
  scratch_value_.clear();
  std::size_t i = 0;
  std::size_t a = 0;
  const std::size_t n = index_.size();
  while (i < n || a < active.size()) {
    if (a == active.size() || (i < n && index_[i] < active[a])) {
      const double v = decay * value_[i];
      if (std::abs(v) >= epsilon && v != 0.0) {
        scratch_index_.push_back(index_[i]);
        scratch_value_.push_back(v);
      }
      ++i;
    } else if (i == n || active[a] < index_[i]) {
      scratch_index_.push_back(active[a]);
      scratch_value_.push_back(1.0);
      ++a;
    } else {
      scratch_index_.push_back(active[a]);
      scratch_value_.push_back(replacing ? 1.0 : decay * value_[i] + 1.0);
      ++i;
      ++a;
    }
  }
  index_.swap(scratch_index_);
  value_.swap(scratch_value_);
}

double SparseTrace::at(std::uint32_t feature) const {
  const auto it = std::lower_bound(index_.begin(), index_.end(), feature);
  if (it == index_.end() || *it != feature) return 0.0;
  return value_[static_cast<std::size_t>(it - index_.begin())];
}

double sparse_dot(std::span<const double> w, const FeatureVector& x) {
  double sum = 0.0;
  for (std::uint32_t i : x.active) sum += w[i];
  return sum;
}

GvfLearner::GvfLearner(GvfQuestion question, LearnerParams params, std::uint32_t num_features, int active_count)
    : question_(std::move(question)), params_(params), gamma_(question_.gamma()),
      alpha_(params.alpha_base / static_cast<double>(active_count)), owned_(num_features, 0.0), w_(owned_) {
  validate_params(params_);
  if (active_count < 1) throw ConfigError("active_count must be >= 1");
  if (question_.timescale < 1) throw ConfigError("timescale must be >= 1");
}

GvfLearner::GvfLearner(GvfQuestion question, LearnerParams params, std::span<double> weights, int active_count)
    : question_(std::move(question)), params_(params), gamma_(question_.gamma()),
      alpha_(params.alpha_base / static_cast<double>(active_count)), w_(weights) {
  validate_params(params_);
  if (active_count < 1) throw ConfigError("active_count must be >= 1");
  if (question_.timescale < 1) throw ConfigError("timescale must be >= 1");
}

void GvfLearner::check_size(const FeatureVector& x) const {
  if (x.num_features_total != w_.size()) {
    throw ConfigError("feature vector size " + std::to_string(x.num_features_total) + " does not match learner '" +
                      question_.id + "' (" + std::to_string(w_.size()) + ")");
  }
}

double GvfLearner::predict(const FeatureVector& x) const {
  check_size(x);
  last_prediction_ = sparse_dot(w_, x);
  return last_prediction_;
}

double GvfLearner::update(const FeatureVector& x_t, double c_next, const FeatureVector& x_next) {
  check_size(x_t);
  check_size(x_next);
  const double v_t = sparse_dot(w_, x_t);
  const double v_next = sparse_dot(w_, x_next);
  return apply(x_t, c_next + gamma_ * v_next - v_t);
}

double GvfLearner::update_terminal(const FeatureVector& x_t, double c_next) {
  check_size(x_t);
  return apply(x_t, c_next - sparse_dot(w_, x_t));
}

double GvfLearner::apply(const FeatureVector& x_t, double delta) {
  if (!std::isfinite(delta)) {
    throw DivergenceError(question_.id, "learner '" + question_.id + "' diverged: non-finite TD error");
  }
  trace_.decay_and_mark(gamma_ * params_.lambda, x_t.active, params_.replacing_traces, params_.trace_epsilon);
  const double step = alpha_ * delta;
  const auto idx = trace_.indices();
  const auto val = trace_.values();
  if (in_batch_) {
    for (std::size_t k = 0; k < idx.size(); ++k) pending_[idx[k]] += step * val[k];
  } else {
    for (std::size_t k = 0; k < idx.size(); ++k) w_[idx[k]] += step * val[k];
  }
  last_delta_ = delta;
  return delta;
}

void GvfLearner::begin_batch() {
  in_batch_ = true;
  pending_.clear();
}

void GvfLearner::end_batch() {
  for (const auto& [i, dw] : pending_) w_[i] += dw;
  pending_.clear();
  in_batch_ = false;
}

double normalize_prediction(double v, double gamma) { return v * (1.0 - gamma); }

int verification_horizon(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
  if (gamma == 0.0) return 1;
  return static_cast<int>(std::ceil(std::log(0.01) / std::log(gamma)));
}

ReturnVerifier::ReturnVerifier(double gamma) : gamma_(gamma), horizon_(verification_horizon(gamma)) {
  discounts_.resize(static_cast<std::size_t>(horizon_));
  double g = 1.0;
  for (auto& d : discounts_) {
    d = g;
    g *= gamma_;
  }
}

std::optional<MaturedReturn> ReturnVerifier::observe(std::int64_t step, double prediction, double cumulant) {
  pending_.push_back({step, prediction, cumulant});
  if (pending_.size() <= static_cast<std::size_t>(horizon_)) return std::nullopt;
  double g = 0.0;
  for (std::size_t k = 0; k < discounts_.size(); ++k) g += discounts_[k] * pending_[k + 1].cumulant;
  MaturedReturn out{pending_.front().step, g, pending_.front().prediction};
  pending_.pop_front();
  return out;
}

std::vector<MaturedReturn> ReturnVerifier::finish(bool pad) {
  std::vector<MaturedReturn> out;
  if (pad) {
    while (!pending_.empty()) {
      double g = 0.0;
      for (std::size_t k = 0; k + 1 < pending_.size() && k < discounts_.size(); ++k) {
        g += discounts_[k] * pending_[k + 1].cumulant;
      }
      out.push_back({pending_.front().step, g, pending_.front().prediction});
      pending_.pop_front();
    }
  }
  pending_.clear();
  return out;
}

void ReturnVerifier::reset() { pending_.clear(); }

}  // namespace gvfswitch
