#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "copestop/errors.hpp"
#include "copestop/quadrature.hpp"

namespace copestop {

/// Absolute tolerance used when comparing a degree against the real-valued
/// threshold (and for stopping-set membership); ties resolve as Send.
inline constexpr double kBoundaryTol = 1e-9;
/// Absolute tolerance of the adaptive quadrature behind the numeric oracle.
inline constexpr double kQuadratureAbsTol = 1e-10;
/// The truncated series stops once this much cumulative mass is covered.
inline constexpr double kSeriesTailTol = 1e-12;
/// The integration interval is cut where the opportunity-interval density
/// has at most this much tail mass.
inline constexpr double kIntervalTailMass = 1e-14;

enum class Decision : std::uint8_t { Wait, Send };

/// Parameter set of the send/wait rule. Rates are per simulated time unit;
/// the discount applies per buffer slot and time unit; the gain for
/// transmitting at coding degree d is gain_slope * d + gain_intercept.
struct PolicyParams {
  double degree_growth_rate = 0.0;  // expected best-degree increments per time unit
  double opportunity_rate = 1.0;    // transmission opportunities per time unit
  double delay_discount = 0.05;     // per (buffer slot x time unit)
  int buffer_size = 40;             // output queue capacity in packets
  double gain_slope = 1.0;
  double gain_intercept = 0.0;

  void validate() const {
    if (!(degree_growth_rate >= 0)) throw std::invalid_argument("degree_growth_rate must be >= 0");
    if (!(opportunity_rate > 0)) throw std::invalid_argument("opportunity_rate must be > 0");
    if (!(delay_discount > 0)) throw std::invalid_argument("delay_discount must be > 0");
    if (buffer_size < 1) throw std::invalid_argument("buffer_size must be >= 1");
    if (!(gain_slope > 0)) throw std::invalid_argument("gain_slope must be > 0");
  }

  double discount_scale() const { return delay_discount * buffer_size; }
};

/// Gain of transmitting as a function of coding degree. Linear by default;
/// a custom shape is accepted by the numeric routines but refused by the
/// closed-form threshold, which only exists for the linear family.
class Gain {
 public:
  Gain() = default;
  static Gain linear(double slope, double intercept) {
    Gain g;
    g.slope_ = slope;
    g.intercept_ = intercept;
    return g;
  }
  static Gain linear_from(const PolicyParams& p) { return linear(p.gain_slope, p.gain_intercept); }
  static Gain custom(std::function<double(double)> fn) {
    Gain g;
    g.custom_ = std::move(fn);
    return g;
  }

  bool is_linear() const { return !custom_; }
  double slope() const { return slope_; }
  double intercept() const { return intercept_; }
  double operator()(double degree) const {
    return custom_ ? custom_(degree) : slope_ * degree + intercept_;
  }

 private:
  double slope_ = 1.0;
  double intercept_ = 0.0;
  std::function<double(double)> custom_;
};

/// Overall growth rate of the best coding degree: the report and data-packet
/// arrival rates thinned by their respective raise probabilities.
inline double compose_degree_growth_rate(double report_rate, double report_raise_prob,
                                         double packet_rate, double packet_raise_prob) {
  if (!(report_rate >= 0) || !(packet_rate >= 0))
    throw std::invalid_argument("rates must be >= 0");
  if (!(report_raise_prob >= 0 && report_raise_prob <= 1) ||
      !(packet_raise_prob >= 0 && packet_raise_prob <= 1))
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  return report_rate * report_raise_prob + packet_rate * packet_raise_prob;
}

/// E[e^{-s T}] for T ~ Exp(opportunity_rate) with s = discount * buffer size.
inline double expected_discount(const PolicyParams& p) {
  p.validate();
  const double s = p.discount_scale();
  return p.opportunity_rate / (s + p.opportunity_rate);
}

/// E[T e^{-s T}] for the same interval distribution.
inline double expected_weighted_discount(const PolicyParams& p) {
  p.validate();
  const double s = p.discount_scale();
  return p.opportunity_rate / ((s + p.opportunity_rate) * (s + p.opportunity_rate));
}

/// Closed-form send threshold d* for a linear gain: transmit once the best
/// available coding degree reaches it. May be <= 1, in which case every
/// state is a send state.
inline double threshold(const PolicyParams& p, const Gain& gain) {
  p.validate();
  if (!gain.is_linear())
    throw UnsupportedGain("closed-form threshold exists only for linear gains");
  const double s = p.discount_scale();
  return p.degree_growth_rate * p.opportunity_rate / (s * (s + p.opportunity_rate)) -
         gain.intercept() / gain.slope();
}

inline double threshold(const PolicyParams& p) { return threshold(p, Gain::linear_from(p)); }

/// The decision rule: Send iff degree >= threshold, with ties resolved as Send.
inline Decision decide(int degree, const PolicyParams& p) {
  if (degree < 1) throw std::invalid_argument("degree must be >= 1");
  return degree + kBoundaryTol >= threshold(p) ? Decision::Send : Decision::Wait;
}

/// Probability that the best degree moves from `from` to `to` over an
/// interval of the given length while waiting: Poisson increments, never a
/// decrease.
inline double wait_transition_prob(int from, int to, double interval, double growth_rate) {
  if (from < 1 || to < 1) throw std::invalid_argument("degrees must be >= 1");
  if (!(interval >= 0)) throw std::invalid_argument("interval must be >= 0");
  if (!(growth_rate >= 0)) throw std::invalid_argument("growth_rate must be >= 0");
  if (to < from) return 0.0;
  const int k = to - from;
  const double mean = growth_rate * interval;
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - std::lgamma(static_cast<double>(k) + 1));
}

namespace detail {

/// Sum_{k>=0} Poisson(k; mean) * reward(base + k), truncated once the
/// cumulative Poisson mass exceeds 1 - kSeriesTailTol. Works in log space
/// around the mode so that very large means do not underflow.
template <typename RewardFn>
double poisson_reward_sum(double mean, double base, const RewardFn& reward) {
  if (mean == 0.0) return reward(base);
  const double target = 1.0 - kSeriesTailTol;
  if (mean <= 32.0) {
    double pmf = std::exp(-mean);
    double mass = pmf;
    double acc = pmf * reward(base);
    for (int k = 1; mass < target; ++k) {
      pmf *= mean / k;
      mass += pmf;
      acc += pmf * reward(base + k);
    }
    return acc;
  }
  // Large mean: start at the mode and expand in both directions.
  const long long mode = static_cast<long long>(mean);
  const double log_pmf_mode =
      -mean + static_cast<double>(mode) * std::log(mean) - std::lgamma(static_cast<double>(mode) + 1);
  const double pmf_mode = std::exp(log_pmf_mode);
  double acc = pmf_mode * reward(base + static_cast<double>(mode));
  double mass = pmf_mode;
  double lo_pmf = pmf_mode;
  double hi_pmf = pmf_mode;
  long long lo = mode;
  long long hi = mode;
  while (mass < target && (lo > 0 || hi_pmf > 0.0)) {
    if (lo > 0) {
      lo_pmf *= static_cast<double>(lo) / mean;
      --lo;
      mass += lo_pmf;
      acc += lo_pmf * reward(base + static_cast<double>(lo));
    }
    hi_pmf *= mean / static_cast<double>(hi + 1);
    ++hi;
    mass += hi_pmf;
    acc += hi_pmf * reward(base + static_cast<double>(hi));
  }
  return acc;
}

}  // namespace detail

/// Expected discounted stop reward one opportunity later, starting from
/// `degree`: the Poisson growth of the degree over the interval, the interval
/// discount, and the exponential interval density, integrated numerically.
/// `stop_reward(j)` is the reward for stopping at degree j. Independent of
/// the closed forms above by construction: truncated series plus adaptive
/// quadrature.
template <typename RewardFn>
double expected_next_stage_gain(double degree, const PolicyParams& p, const RewardFn& stop_reward) {
  p.validate();
  const double s = p.discount_scale();
  const double rate = p.opportunity_rate;
  const double growth = p.degree_growth_rate;
  const double t_cut = -std::log(kIntervalTailMass) / rate;
  auto integrand = [&](double t) {
    const double series = detail::poisson_reward_sum(growth * t, degree, stop_reward);
    return series * std::exp(-s * t) * rate * std::exp(-rate * t);
  };
  return integrate(integrand, 0.0, t_cut, kQuadratureAbsTol);
}

/// Expected reward of waiting exactly one more stage and then stopping, with
/// the stop reward taken one degree back (a transmission at degree j replaces
/// j - 1 native sends). For a linear gain this equals
/// (slope*(d-1) + intercept) * expected_discount + slope * growth * expected_weighted_discount.
inline double lookahead_rhs(int degree, const PolicyParams& p, const Gain& gain) {
  if (degree < 1) throw std::invalid_argument("degree must be >= 1");
  return expected_next_stage_gain(static_cast<double>(degree), p,
                                  [&](double j) { return gain(j - 1.0); });
}

inline double lookahead_rhs(int degree, const PolicyParams& p) {
  return lookahead_rhs(degree, p, Gain::linear_from(p));
}

/// Membership in the stopping set: stopping now is at least as good as
/// waiting one stage and stopping then. The closed-form threshold evaluates
/// the gain at the degree itself on both sides of the comparison, and this
/// test follows the same convention, so the smallest member is ceil(d*).
/// Note the identity: the right-hand side equals lookahead_rhs(degree + 1).
inline bool in_stopping_set(int degree, const PolicyParams& p, const Gain& gain) {
  if (degree < 1) throw std::invalid_argument("degree must be >= 1");
  const double wait_gain = expected_next_stage_gain(static_cast<double>(degree), p,
                                                    [&](double j) { return gain(j); });
  return gain(static_cast<double>(degree)) + kBoundaryTol >= wait_gain;
}

inline bool in_stopping_set(int degree, const PolicyParams& p) {
  return in_stopping_set(degree, p, Gain::linear_from(p));
}

/// Solution of the optimality recursion on degrees 1..d_max.
struct ValueSolution {
  std::vector<double> values;    // indexed by degree, values[0] unused
  std::vector<Decision> policy;  // indexed by degree, policy[0] unused
  int threshold_state = 1;       // smallest Send degree
  int iterations = 0;
};

/// Value iteration for the wait/send recursion:
///   v(d) = max{ E_T[ sum_j P(d -> j over T) v(j) e^{-sT} ], stop_reward(d) }
/// with stop_reward(d) = gain(d) for d >= 2 and v(1) pinned to 0 (sending a
/// single native replaces nothing, so state 1 carries no reward). States
/// above d_max are absorbed into an immediate send at their stop reward. The
/// continuation expectation uses the exact interval-averaged Poisson kernel
///   E_T[Poisson(k; growth*T) e^{-sT}] = (rate/a) * (growth/a)^k,  a = growth + s + rate.
inline ValueSolution value_iteration(const PolicyParams& p, int d_max, double tol,
                                     const Gain& gain, int max_iterations = 200000) {
  p.validate();
  if (!(tol > 0)) throw std::invalid_argument("tol must be > 0");
  if (gain.is_linear()) {
    const double d_star = threshold(p, gain);
    const int required = static_cast<int>(std::ceil(d_star)) + 10;
    if (d_max < required)
      throw std::invalid_argument("d_max must be >= ceil(threshold) + 10 = " +
                                  std::to_string(required));
  }
  if (d_max < 2) throw std::invalid_argument("d_max must be >= 2");

  const double s = p.discount_scale();
  const double a = p.degree_growth_rate + s + p.opportunity_rate;
  const double w0 = p.opportunity_rate / a;
  const double ratio = p.degree_growth_rate / a;

  auto stop_reward = [&](int d) { return d <= 1 ? 0.0 : gain(static_cast<double>(d)); };

  std::vector<double> v(static_cast<std::size_t>(d_max) + 1, 0.0);
  auto continuation = [&](int d) {
    double acc = 0.0;
    double w = w0;
    for (int k = 0;; ++k) {
      const int j = d + k;
      const double vj = j <= d_max ? v[static_cast<std::size_t>(j)] : stop_reward(j);
      acc += w * vj;
      w *= ratio;
      if (w * (std::abs(vj) + 1.0) < 1e-16 * (std::abs(acc) + 1.0)) break;
    }
    return acc;
  };

  std::vector<double> next(v.size(), 0.0);
  int iterations = 0;
  double delta = 0.0;
  for (;;) {
    ++iterations;
    delta = 0.0;
    next[1] = 0.0;
    for (int d = d_max; d >= 2; --d) {
      const double value = std::max(continuation(d), stop_reward(d));
      delta = std::max(delta, std::abs(value - v[static_cast<std::size_t>(d)]));
      next[static_cast<std::size_t>(d)] = value;
    }
    v.swap(next);
    if (delta < tol) break;
    if (iterations >= max_iterations)
      throw NumericFailure("value iteration did not converge in " +
                               std::to_string(max_iterations) + " iterations",
                           delta);
  }

  ValueSolution out;
  out.values = v;
  out.policy.assign(static_cast<std::size_t>(d_max) + 1, Decision::Wait);
  out.iterations = iterations;
  out.threshold_state = d_max + 1;
  for (int d = 1; d <= d_max; ++d) {
    const bool send = stop_reward(d) + kBoundaryTol >= continuation(d);
    out.policy[static_cast<std::size_t>(d)] = send ? Decision::Send : Decision::Wait;
    if (send && out.threshold_state > d_max) out.threshold_state = d;
  }
  return out;
}

inline ValueSolution value_iteration(const PolicyParams& p, int d_max, double tol) {
  return value_iteration(p, d_max, tol, Gain::linear_from(p));
}

}  // namespace copestop
