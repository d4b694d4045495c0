#include <catch2/catch.hpp>

#include <cmath>
#include <cstring>

#include "copestop/estimators.hpp"
#include "copestop/rng.hpp"

using namespace copestop;

TEST_CASE("lms prediction") {
  CHECK(LmsFilter({1, 0, 0, 0}, {7.5, 1, 2, 3}, 0.1).predict() == 7.5);
  CHECK(LmsFilter({0, 0, 0, 0}, {4, 4, 4, 4}, 0.1).predict() == 0.0);
  CHECK(LmsFilter({0.25, 0.25, 0.25, 0.25}, {4, 4, 4, 4}, 0.1).predict() == Approx(4.0));
}

TEST_CASE("lms cold start returns the running mean") {
  LmsFilter filter(4, 0.1);
  CHECK(filter.predict() == 0.0);
  filter.update(2.0);
  CHECK_FALSE(filter.primed());
  CHECK(filter.predict() == Approx(2.0));
  filter.update(4.0);
  CHECK(filter.predict() == Approx(3.0));
  filter.update(6.0);
  filter.update(8.0);
  CHECK(filter.primed());
}

TEST_CASE("lms update rule") {
  SECTION("textbook step from zero weights") {
    LmsFilter filter({0, 0, 0, 0}, {1, 1, 1, 1}, 0.1);
    filter.update(1.0);  // prediction 0, error 1
    for (double w : filter.weights()) CHECK(w == Approx(0.1));
    CHECK(filter.history()[0] == 1.0);
  }

  SECTION("zero error leaves weights bitwise unchanged") {
    LmsFilter filter({0.5, 0.25, 0.125, 0.125}, {2, 2, 2, 2}, 0.01);
    const double predicted = filter.predict();
    const auto before = filter.weights();
    filter.update(predicted);
    const auto& after = filter.weights();
    REQUIRE(before.size() == after.size());
    CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
  }

  SECTION("constant stream converges") {
    DegreeRateEstimator est(4, 0.01);
    for (int i = 0; i < 500; ++i) est.observe(7.3);
    CHECK(std::abs(est.predict() - 7.3) / 7.3 < 0.10);
  }

  SECTION("bounded inputs keep weights finite over 1e6 updates") {
    const double u_max = 5.0;
    LmsFilter filter(4, 0.01 / (u_max * u_max));
    Rng rng(42);
    for (int i = 0; i < 1000000; ++i) filter.update(rng.uniform(0.0, u_max));
    for (double w : filter.weights()) CHECK(std::isfinite(w));
    CHECK(std::isfinite(filter.predict()));
  }
}

TEST_CASE("lms constructor validation") {
  CHECK_THROWS_AS(LmsFilter(0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(LmsFilter(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(LmsFilter({1, 2}, {1}, 0.1), std::invalid_argument);
}

TEST_CASE("rate counter") {
  RateCounter counter{10.0, 0};
  counter.record(10.0);
  CHECK(counter.event_count == 1);
  for (int i = 0; i < 9; ++i) counter.record(11.0);
  CHECK(counter.event_count == 10);
  CHECK(counter.estimate(12.0) == Approx(5.0));
  CHECK_THROWS_AS(counter.record(9.0), std::invalid_argument);
  CHECK_THROWS_AS(counter.estimate(10.0), std::invalid_argument);

  RateCounter empty{0.0, 0};
  CHECK(empty.estimate(3.0) == 0.0);

  SECTION("rate magnitude fixture") {
    RateCounter c{0.0, 0};
    for (int i = 0; i < 58; ++i) c.record(0.9);
    CHECK(c.estimate(0.9967) == Approx(58.19).margin(0.01));
  }

  SECTION("exactness after n records") {
    RateCounter c{2.0, 0};
    for (int i = 0; i < 1234; ++i) c.record(5.0);
    CHECK(c.estimate(6.0) == 1234.0 / 4.0);
  }
}

TEST_CASE("degree growth observation") {
  CHECK(degree_growth_estimate({0.0, 0.0, 1.0}, 5.0, 3.0) == 0.0);
  CHECK(degree_growth_estimate({0.125, 0.25, 1.0}, 4.0, 2.0) == Approx(1.0));
  CHECK(degree_growth_estimate({0.3, 0.0, 1.0}, 10.0, 0.0) == Approx(3.0));
  CHECK_THROWS_AS(degree_growth_estimate({0.1, 0.1, 0.0}, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(degree_growth_estimate({1.5, 0.1, 1.0}, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("rate estimate converges on a poisson stream") {
  Rng rng(777);
  RateCounter counter{0.0, 0};
  double t = 0.0;
  for (int i = 0; i < 2500; ++i) {
    t += rng.exponential(5.0);
    counter.record(t);
  }
  CHECK(std::abs(counter.estimate(t) - 5.0) / 5.0 < 0.05);
}
