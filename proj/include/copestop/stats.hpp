#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace copestop {

/// Quantile of the exponential distribution with the given rate.
inline double exponential_quantile(double p, double rate) {
  if (!(p >= 0 && p < 1)) throw std::invalid_argument("quantile requires p in [0, 1)");
  if (!(rate > 0)) throw std::invalid_argument("rate must be > 0");
  return -std::log1p(-p) / rate;
}

/// Kolmogorov-Smirnov statistic of a sample against Exp(rate).
inline double ks_statistic_exponential(std::vector<double> samples, double rate) {
  if (samples.empty()) throw std::invalid_argument("ks statistic needs samples");
  if (!(rate > 0)) throw std::invalid_argument("rate must be > 0");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * samples[i]);
    d = std::max(d, std::max(cdf - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - cdf));
  }
  return d;
}

/// Asymptotic 5% critical value of the KS statistic for a fully specified
/// null distribution.
inline double ks_critical_5pct(std::size_t n) {
  return 1.3581 / std::sqrt(static_cast<double>(n));
}

}  // namespace copestop
