#include <catch2/catch.hpp>

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "copestop/errors.hpp"
#include "copestop/quadrature.hpp"
#include "copestop/rng.hpp"
#include "copestop/stopping_policy.hpp"

using namespace copestop;

namespace {

PolicyParams params(double growth, double opportunity, double discount = 0.05, int buffer = 40,
                    double slope = 1.0, double intercept = 0.0) {
  return PolicyParams{growth, opportunity, discount, buffer, slope, intercept};
}

// Reference integrands, written out directly so the closed forms are checked
// against an expression the library does not share.
double discount_by_quadrature(const PolicyParams& p) {
  const double s = p.discount_scale();
  const double rate = p.opportunity_rate;
  const double cut = -std::log(1e-14) / rate;
  return integrate([&](double t) { return std::exp(-s * t) * rate * std::exp(-rate * t); }, 0.0,
                   cut, 1e-11);
}

double weighted_discount_by_quadrature(const PolicyParams& p) {
  const double s = p.discount_scale();
  const double rate = p.opportunity_rate;
  const double cut = -std::log(1e-14) / rate;
  return integrate([&](double t) { return t * std::exp(-s * t) * rate * std::exp(-rate * t); },
                   0.0, cut, 1e-11);
}

// Continuous extension of the membership comparison, used to locate the send
// boundary by bisection without touching the closed form.
double membership_margin(double degree, const PolicyParams& p) {
  const Gain gain = Gain::linear_from(p);
  const double wait = expected_next_stage_gain(degree, p, [&](double j) { return gain(j); });
  return gain(degree) - wait;
}

double boundary_by_bisection(const PolicyParams& p, double lo, double hi) {
  REQUIRE(membership_margin(lo, p) < 0);
  REQUIRE(membership_margin(hi, p) >= 0);
  for (int i = 0; i < 60 && hi - lo > 1e-9; ++i) {
    const double mid = 0.5 * (lo + hi);
    (membership_margin(mid, p) >= 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

const std::vector<double> kOpportunityGrid{0.1, 1.0, 5.0, 10.0, 100.0};
const std::vector<double> kDiscountScaleGrid{0.02, 0.2, 2.0, 10.0};

}  // namespace

TEST_CASE("degree growth rate composition") {
  CHECK(compose_degree_growth_rate(0, 0.5, 0, 0.5) == 0.0);
  CHECK(compose_degree_growth_rate(2, 0.25, 4, 0.125) == Approx(1.0));
  CHECK(compose_degree_growth_rate(10, 1, 0, 1) == Approx(10.0));
  CHECK_THROWS_AS(compose_degree_growth_rate(-1, 0.5, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compose_degree_growth_rate(1, 1.5, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compose_degree_growth_rate(1, 0.5, 2, -0.1), std::invalid_argument);
}

TEST_CASE("policy params validation") {
  CHECK_NOTHROW(params(0, 1).validate());
  CHECK_THROWS_AS(params(-1, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, 0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, 1, 0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, 1, 0.05, 0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, 1, 0.05, 40, 0).validate(), std::invalid_argument);
}

TEST_CASE("expected discount: closed form vs quadrature") {
  CHECK(expected_discount(params(0, 5)) == Approx(5.0 / 7.0).margin(1e-12));
  CHECK(expected_discount(params(0, 1)) == Approx(1.0 / 3.0).margin(1e-12));
  // Vanishing discount scale: the expectation approaches 1.
  CHECK(expected_discount(params(0, 5, 1e-13, 1)) == Approx(1.0).margin(1e-9));
  for (double rate : kOpportunityGrid)
    for (double scale : kDiscountScaleGrid) {
      const PolicyParams p = params(0, rate, scale / 40.0, 40);
      CHECK(std::abs(expected_discount(p) - discount_by_quadrature(p)) < 1e-9);
    }
}

TEST_CASE("expected weighted discount: closed form vs quadrature") {
  CHECK(expected_weighted_discount(params(0, 5)) == Approx(5.0 / 49.0).margin(1e-12));
  CHECK(expected_weighted_discount(params(0, 1)) == Approx(1.0 / 9.0).margin(1e-12));
  // Immediate opportunities: T -> 0, so the weighted expectation vanishes.
  CHECK(expected_weighted_discount(params(0, 1e9)) < 1e-8);
  for (double rate : kOpportunityGrid)
    for (double scale : kDiscountScaleGrid) {
      const PolicyParams p = params(0, rate, scale / 40.0, 40);
      CHECK(std::abs(expected_weighted_discount(p) - weighted_discount_by_quadrature(p)) < 1e-9);
    }
}

TEST_CASE("threshold closed form") {
  CHECK(threshold(params(10, 5)) == Approx(50.0 / 14.0).margin(1e-12));
  CHECK(threshold(params(0, 7)) == 0.0);
  CHECK(threshold(params(2, 1)) == Approx(1.0 / 3.0).margin(1e-12));
  CHECK_THROWS_AS(threshold(params(1, 1), Gain::custom([](double d) { return d * d; })),
                  UnsupportedGain);
}

TEST_CASE("threshold agrees with the bisected membership boundary") {
  CHECK(boundary_by_bisection(params(10, 5), 0.5, 20.0) ==
        Approx(50.0 / 14.0).margin(1e-6));
  CHECK(boundary_by_bisection(params(2, 1), 0.05, 5.0) == Approx(1.0 / 3.0).margin(1e-6));
}

TEST_CASE("threshold comparative statics") {
  const std::vector<double> growths{0.5, 2, 8};
  for (double rate : {1.0, 5.0, 20.0})
    for (double scale : {0.2, 2.0}) {
      for (std::size_t i = 0; i + 1 < growths.size(); ++i)
        CHECK(threshold(params(growths[i], rate, scale / 40.0)) <=
              threshold(params(growths[i + 1], rate, scale / 40.0)));
      CHECK(threshold(params(4, rate, scale / 40.0)) <=
            threshold(params(4, rate * 2, scale / 40.0)));
      CHECK(threshold(params(4, rate, scale / 40.0)) >=
            threshold(params(4, rate, scale / 40.0 * 3)));
      CHECK(threshold(params(4, rate, scale / 40.0, 40)) >=
            threshold(params(4, rate, scale / 40.0, 120)));
    }
}

TEST_CASE("decision rule") {
  const PolicyParams low = params(2, 1);  // threshold 1/3
  CHECK(decide(1, low) == Decision::Send);
  const PolicyParams mid = params(10, 5);  // threshold 3.5714
  CHECK(decide(3, mid) == Decision::Wait);
  CHECK(decide(4, mid) == Decision::Send);
  CHECK_THROWS_AS(decide(0, mid), std::invalid_argument);
  // Pure function: repeated evaluation is stable.
  CHECK(decide(3, mid) == decide(3, mid));
}

TEST_CASE("smallest send state matches ceil of the threshold") {
  for (double growth : {2.0, 6.0, 25.0})
    for (double rate : {1.0, 5.0, 10.0})
      for (double scale : {0.2, 2.0}) {
        const PolicyParams p = params(growth, rate, scale / 40.0);
        const double d_star = threshold(p);
        if (std::abs(d_star - std::round(d_star)) < 1e-6) continue;  // ties tested separately
        int smallest = 0;
        for (int d = 1; d < 500; ++d)
          if (decide(d, p) == Decision::Send) {
            smallest = d;
            break;
          }
        CHECK(smallest == std::max(1.0, std::ceil(d_star)));
      }
}

TEST_CASE("threshold ties resolve as send") {
  // slope 1, intercept chosen so the threshold sits exactly on an integer
  const PolicyParams base = params(10, 5);
  const double d_star = threshold(base);
  PolicyParams tied = base;
  tied.gain_intercept = -(std::ceil(d_star) - d_star);  // shifts threshold to ceil(d_star)
  const double shifted = threshold(tied);
  REQUIRE(shifted == Approx(std::ceil(d_star)).margin(1e-12));
  CHECK(decide(static_cast<int>(std::ceil(d_star)), tied) == Decision::Send);
}

TEST_CASE("wait transition kernel") {
  CHECK(wait_transition_prob(5, 3, 1.0, 2.0) == 0.0);
  CHECK(wait_transition_prob(2, 2, 0.5, 2.0) == Approx(std::exp(-1.0)).margin(1e-12));
  CHECK(wait_transition_prob(1, 1, 0.0, 5.0) == 1.0);
  CHECK_THROWS_AS(wait_transition_prob(0, 1, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(wait_transition_prob(1, 1, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(wait_transition_prob(1, 1, 1.0, -1.0), std::invalid_argument);

  SECTION("normalization") {
    const double mean = 7.3;
    double total = 0.0;
    for (int j = 2; j < 2 + 200; ++j) total += wait_transition_prob(2, j, 1.0, mean);
    CHECK(total == Approx(1.0).margin(1e-9));
  }

  SECTION("monte carlo cross-check of the zero-increment mass") {
    // Poisson(1) sampled by Knuth's product method on the library generator.
    Rng rng(20260808);
    const int trials = 200000;
    int zeros = 0;
    const double floor = std::exp(-1.0);
    for (int i = 0; i < trials; ++i) {
      int k = -1;
      double product = 1.0;
      do {
        ++k;
        product *= rng.uniform01();
      } while (product > floor);
      if (k == 0) ++zeros;
    }
    const double freq = static_cast<double>(zeros) / trials;
    CHECK(std::abs(freq - wait_transition_prob(2, 2, 0.5, 2.0)) < 0.004);  // ~3.7 sigma
  }
}

TEST_CASE("one-stage lookahead") {
  const Gain identity = Gain::linear(1.0, 0.0);
  CHECK(lookahead_rhs(1, params(0, 5), identity) == Approx(0.0).margin(1e-12));
  const PolicyParams p = params(10, 5);
  CHECK(lookahead_rhs(4, p) == Approx(3.0 * (5.0 / 7.0) + 10.0 * (5.0 / 49.0)).margin(1e-8));
  CHECK(lookahead_rhs(3, p) == Approx(2.0 * (5.0 / 7.0) + 10.0 * (5.0 / 49.0)).margin(1e-8));
  CHECK_THROWS_AS(lookahead_rhs(0, p), std::invalid_argument);

  SECTION("linear-gain decomposition holds across parameters") {
    for (double growth : {0.0, 1.0, 12.0})
      for (double rate : {1.0, 5.0, 50.0})
        for (double scale : {0.2, 2.0})
          for (int d : {1, 3, 9}) {
            const PolicyParams q = params(growth, rate, scale / 40.0, 40, 2.0, 0.5);
            const double expected = (2.0 * (d - 1) + 0.5) * expected_discount(q) +
                                    2.0 * growth * expected_weighted_discount(q);
            CHECK(lookahead_rhs(d, q) == Approx(expected).margin(1e-8));
          }
  }
}

TEST_CASE("stopping-set membership") {
  const PolicyParams p = params(10, 5);  // threshold 3.5714
  // The one-stage integral with the reward taken one degree back sits above
  // the plain gain at 4; membership nevertheless begins at ceil(threshold)
  // because both sides of the closed-form comparison evaluate the gain at
  // the degree itself.
  CHECK(lookahead_rhs(4, p) > 3.0);
  CHECK(in_stopping_set(4, p));
  CHECK_FALSE(in_stopping_set(3, p));
  CHECK(in_stopping_set(1, params(0, 5)));
  CHECK_FALSE(in_stopping_set(3, params(50, 5)));  // threshold ~17.9

  SECTION("membership comparison equals the shifted lookahead") {
    for (int d = 1; d <= 6; ++d) {
      const bool expected = p.gain_slope * d + p.gain_intercept + kBoundaryTol >=
                            lookahead_rhs(d + 1, p);
      CHECK(in_stopping_set(d, p) == expected);
    }
  }

  SECTION("upward closure on a parameter grid") {
    for (double growth : {2.0, 10.0})
      for (double rate : {1.0, 5.0})
        for (double scale : {0.2, 2.0}) {
          const PolicyParams q = params(growth, rate, scale / 40.0);
          bool member = false;
          for (int d = 1; d <= 100; ++d) {
            const bool now = in_stopping_set(d, q);
            if (member) CHECK(now);
            member = now;
          }
          CHECK(member);  // the set is reached within the scanned range
        }
  }

  SECTION("smallest member equals ceil of the threshold near the boundary") {
    for (double rate : kOpportunityGrid)
      for (double scale : kDiscountScaleGrid) {
        const PolicyParams q = params(2, rate, scale / 40.0);
        const double d_star = threshold(q);
        const int boundary = static_cast<int>(std::max(1.0, std::ceil(d_star - kBoundaryTol)));
        CHECK(in_stopping_set(boundary, q));
        if (boundary > 1) CHECK_FALSE(in_stopping_set(boundary - 1, q));
      }
  }
}

TEST_CASE("random parameters: decision rule, membership and value iteration agree") {
  Rng rng(0xC0FFEE);
  int checked = 0;
  while (checked < 40) {
    const double growth = rng.uniform(0.5, 40.0);
    const double rate = rng.uniform(0.5, 30.0);
    const double scale = rng.uniform(0.1, 8.0);
    const double slope = rng.uniform(0.5, 3.0);
    const double intercept = rng.uniform(-0.5 * slope, 2.0);
    const PolicyParams p{growth, rate, scale / 40.0, 40, slope, intercept};
    const double d_star = threshold(p);
    if (d_star <= 1.05 || d_star >= 40.0) continue;
    if (std::abs(d_star - std::round(d_star)) < 1e-3) continue;  // stay off the tie boundary
    ++checked;
    const int boundary = static_cast<int>(std::ceil(d_star));

    int smallest_send = 0;
    for (int d = 1; d <= boundary + 2; ++d)
      if (decide(d, p) == Decision::Send) {
        smallest_send = d;
        break;
      }
    CHECK(smallest_send == boundary);

    CHECK(in_stopping_set(boundary, p));
    CHECK_FALSE(in_stopping_set(boundary - 1, p));
    CHECK(in_stopping_set(boundary + 1, p));  // upward closed across the boundary

    const ValueSolution sol = value_iteration(p, boundary + 50, 1e-10);
    CHECK(sol.threshold_state == boundary);
    CHECK(sol.values[1] == 0.0);
    for (std::size_t d = 2; d < sol.values.size(); ++d)
      CHECK(sol.values[d - 1] <= sol.values[d] + 1e-9);
  }
}

TEST_CASE("policy evaluation is safe from concurrent callers") {
  const PolicyParams p = params(10, 5);
  const double expected_threshold = threshold(p);
  const double expected_lookahead = lookahead_rhs(4, p);
  std::atomic<int> mismatches{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        if (threshold(p) != expected_threshold) ++mismatches;
        if (decide(4, p) != Decision::Send) ++mismatches;
        if (std::abs(lookahead_rhs(4, p) - expected_lookahead) > 1e-12) ++mismatches;
      }
    });
  for (auto& t : pool) t.join();
  CHECK(mismatches == 0);
}

TEST_CASE("value iteration kernel weights match quadrature") {
  const PolicyParams p = params(10, 5);
  const double s = p.discount_scale();
  const double a = p.degree_growth_rate + s + p.opportunity_rate;
  for (int k = 0; k < 6; ++k) {
    const double closed = (p.opportunity_rate / a) * std::pow(p.degree_growth_rate / a, k);
    const double cut = -std::log(1e-14) / p.opportunity_rate;
    const double numeric = integrate(
        [&](double t) {
          return wait_transition_prob(1, 1 + k, t, p.degree_growth_rate) * std::exp(-s * t) *
                 p.opportunity_rate * std::exp(-p.opportunity_rate * t);
        },
        0.0, cut, 1e-12);
    CHECK(closed == Approx(numeric).margin(1e-9));
  }
}

TEST_CASE("value iteration") {
  SECTION("zero growth sends everywhere, values pin to the stop reward") {
    const PolicyParams p = params(0, 5);
    const ValueSolution sol = value_iteration(p, 30, 1e-10);
    CHECK(sol.values[1] == 0.0);
    CHECK(sol.threshold_state == 1);
    for (int d = 1; d <= 30; ++d) {
      CHECK(sol.policy[d] == Decision::Send);
      if (d >= 2) CHECK(sol.values[d] == Approx(static_cast<double>(d)).margin(1e-9));
    }
  }

  SECTION("reference parameters produce the closed-form boundary") {
    const PolicyParams p = params(10, 5);
    const ValueSolution sol = value_iteration(p, 200, 1e-10);
    CHECK(sol.values[1] == 0.0);
    CHECK(sol.threshold_state == 4);
    bool seen_send = false;
    for (int d = 1; d <= 200; ++d) {
      if (sol.policy[d] == Decision::Send) seen_send = true;
      if (seen_send) CHECK(sol.policy[d] == Decision::Send);
    }
    for (int d = 1; d < 200; ++d) CHECK(sol.values[d] <= sol.values[d + 1] + 1e-12);
  }

  SECTION("oracle equivalence with the decision rule over a grid") {
    for (double growth : {5.0, 10.0, 30.0})
      for (double rate : {1.0, 5.0, 10.0})
        for (double scale : {0.2, 2.0}) {
          const PolicyParams p = params(growth, rate, scale / 40.0);
          const double d_star = threshold(p);
          if (d_star <= 1.0 || d_star > 60.0) continue;
          const int d_max = static_cast<int>(std::ceil(d_star)) + 50;
          const ValueSolution sol = value_iteration(p, d_max, 1e-10);
          int smallest = 0;
          for (int d = 1; d <= d_max; ++d)
            if (decide(d, p) == Decision::Send) {
              smallest = d;
              break;
            }
          CHECK(sol.threshold_state == smallest);
        }
  }

  SECTION("preconditions") {
    const PolicyParams p = params(10, 5);
    CHECK_THROWS_AS(value_iteration(p, 5, 1e-10), std::invalid_argument);
    CHECK_THROWS_AS(value_iteration(p, 200, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(value_iteration(p, 200, 1e-10, Gain::linear_from(p), 1),
                    NumericFailure);
  }

  SECTION("custom gain is accepted by the recursion") {
    const PolicyParams p = params(10, 5);
    const ValueSolution sol =
        value_iteration(p, 60, 1e-10, Gain::custom([](double d) { return d * d; }));
    CHECK(sol.values[1] == 0.0);
    CHECK(sol.policy[60] == Decision::Send);
    CHECK(sol.threshold_state >= 2);
  }
}
