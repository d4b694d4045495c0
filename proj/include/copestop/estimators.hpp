#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "copestop/stopping_policy.hpp"

namespace copestop {

/// Least-mean-squares predictor over the last Z observations. Until Z
/// observations have been recorded the prediction falls back to the running
/// mean of what has been seen so far.
class LmsFilter {
 public:
  LmsFilter(int taps, double step)
      : weights_(check_taps(taps), 0.0), history_(static_cast<std::size_t>(taps), 0.0), step_(step) {
    if (!(step > 0)) throw std::invalid_argument("step must be > 0");
  }

  /// Warm start with explicit weights and history (newest entry first);
  /// the filter is considered primed.
  LmsFilter(std::vector<double> weights, std::vector<double> history, double step)
      : weights_(std::move(weights)), history_(std::move(history)), step_(step) {
    if (weights_.empty() || weights_.size() != history_.size())
      throw std::invalid_argument("weights and history must have equal nonzero length");
    if (!(step > 0)) throw std::invalid_argument("step must be > 0");
    observations_ = static_cast<long long>(weights_.size());
    for (double h : history_) mean_sum_ += h;
  }

  double predict() const {
    if (!primed()) return observations_ == 0 ? 0.0 : mean_sum_ / static_cast<double>(observations_);
    double acc = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) acc += weights_[k] * history_[k];
    return acc;
  }

  /// One adaptation step: error against the current prediction, weight
  /// update along the history that produced it, then the history shifts to
  /// include the new observation.
  void update(double observed) {
    const double error = observed - predict();
    for (std::size_t k = 0; k < weights_.size(); ++k)
      weights_[k] += step_ * error * history_[k];
    for (std::size_t k = history_.size() - 1; k > 0; --k) history_[k] = history_[k - 1];
    history_[0] = observed;
    ++observations_;
    mean_sum_ += observed;
  }

  bool primed() const { return observations_ >= static_cast<long long>(weights_.size()); }
  long long observations() const { return observations_; }
  double step() const { return step_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& history() const { return history_; }

 private:
  static std::size_t check_taps(int taps) {
    if (taps < 1) throw std::invalid_argument("taps must be >= 1");
    return static_cast<std::size_t>(taps);
  }

  std::vector<double> weights_;
  std::vector<double> history_;  // history_[0] is the newest observation
  double step_;
  long long observations_ = 0;
  double mean_sum_ = 0.0;
};

/// Counts events against a start time; the rate estimate is count / elapsed.
struct RateCounter {
  double start_time = 0.0;
  long long event_count = 0;

  void record(double now) {
    if (now < start_time) throw std::invalid_argument("record before counter start");
    ++event_count;
  }

  double estimate(double now) const {
    if (!(now > start_time)) throw std::invalid_argument("no elapsed time to estimate over");
    if (event_count == 0) return 0.0;
    return static_cast<double>(event_count) / (now - start_time);
  }
};

/// Measured raise fractions over one observation window: which share of data
/// packet arrivals and of knowledge receptions raised the best coding degree.
struct DegreeGrowthStats {
  double packet_raise_fraction = 0.0;
  double report_raise_fraction = 0.0;
  double window = 1.0;
};

/// Composes the measured raise fractions with the observed arrival rates
/// into one degree-growth observation, the next input to the LMS predictor.
inline double degree_growth_estimate(const DegreeGrowthStats& stats, double packet_rate,
                                     double report_rate) {
  if (!(stats.window > 0)) throw std::invalid_argument("window must be > 0");
  return compose_degree_growth_rate(report_rate, stats.report_raise_fraction, packet_rate,
                                    stats.packet_raise_fraction);
}

/// LMS wrapper that normalizes observations by their running maximum, which
/// keeps the default step size inside the stable region whatever the scale
/// of the measured rates. Predictions are mapped back to rate units and
/// clamped at zero.
class DegreeRateEstimator {
 public:
  DegreeRateEstimator(int taps, double step) : filter_(taps, step) {}

  void observe(double rate) {
    if (rate > running_max_) running_max_ = rate;
    filter_.update(running_max_ > 0 ? rate / running_max_ : 0.0);
  }

  double predict() const { return std::max(0.0, filter_.predict() * running_max_); }

  const LmsFilter& filter() const { return filter_; }
  double running_max() const { return running_max_; }

 private:
  LmsFilter filter_;
  double running_max_ = 0.0;
};

}  // namespace copestop
