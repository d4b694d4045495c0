#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "copestop/errors.hpp"

namespace copestop {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

namespace detail {

// Gauss-Kronrod 15(7) nodes and weights (positive half, QUADPACK constants).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0,
};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
};
// Gauss-7 weights, aligned with the odd Kronrod nodes (indices 1, 3, 5, 7).
inline constexpr double kGaussWeights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
};

template <typename F>
QuadratureResult gauss_kronrod_15(const F& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double kronrod = 0.0;
  double gauss = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double offset = half * kKronrodNodes[i];
    const double fsum = (i == 7) ? f(mid) : f(mid - offset) + f(mid + offset);
    kronrod += kKronrodWeights[i] * fsum;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * fsum;
  }
  kronrod *= half;
  gauss *= half;
  return {kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to an absolute
/// tolerance. Bisects the segment with the largest error estimate until the
/// summed estimate is below tol. Throws NumericFailure when the segment
/// budget runs out, reporting the tolerance actually achieved.
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10,
                 int max_segments = 4096) {
  struct Segment {
    double a, b;
    QuadratureResult r;
  };
  std::vector<Segment> segments{{a, b, detail::gauss_kronrod_15(f, a, b)}};
  segments.reserve(128);
  auto total_error = [&] {
    double e = 0.0;
    for (const auto& s : segments) e += s.r.error_estimate;
    return e;
  };
  while (total_error() > abs_tol) {
    if (static_cast<int>(segments.size()) >= max_segments)
      throw NumericFailure("adaptive quadrature did not converge", total_error());
    auto worst = std::max_element(
        segments.begin(), segments.end(), [](const Segment& x, const Segment& y) {
          return x.r.error_estimate < y.r.error_estimate;
        });
    const double lo = worst->a, hi = worst->b;
    const double mid = 0.5 * (lo + hi);
    *worst = {lo, mid, detail::gauss_kronrod_15(f, lo, mid)};
    segments.push_back({mid, hi, detail::gauss_kronrod_15(f, mid, hi)});
  }
  double value = 0.0;
  for (const auto& s : segments) value += s.r.value;
  return value;
}

}  // namespace copestop
