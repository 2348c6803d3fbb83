#include <doctest.h>

#include <cmath>

#include "mrfp/rf_geometry.hpp"

using namespace mrfp;

TEST_CASE("undercomplete receptive field quadruples per layer") {
  CHECK(rf_undercomplete({1, 3}) == Rational(9));
  CHECK(rf_undercomplete({2, 3}) == Rational(36));
  CHECK(rf_undercomplete({3, 3}) == Rational(144));
  CHECK(rf_undercomplete({4, 5}) == Rational(25 * 64));
}

TEST_CASE("overcomplete receptive field quarters per layer") {
  CHECK(rf_overcomplete({1, 3}) == Rational(9));
  CHECK(rf_overcomplete({2, 3}) == Rational(9, 4));
  CHECK(rf_overcomplete({3, 3}) == Rational(9, 16));
  CHECK(rf_overcomplete({5, 1}) == Rational(1, 256));
}

TEST_CASE("the two receptive fields are exact reciprocals modulo k^4") {
  for (int i = 1; i <= 8; ++i)
    for (const int k : {1, 3, 5, 7, 9}) {
      const Rational k2 = Rational(k) * Rational(k);
      CHECK(rf_undercomplete({i, k}) * rf_overcomplete({i, k}) == k2 * k2);
    }
}

TEST_CASE("monotonicity in depth") {
  for (const int k : {1, 3, 5}) {
    for (int i = 1; i < 7; ++i) {
      CHECK(rf_undercomplete({i + 1, k}) > rf_undercomplete({i, k}));
      CHECK(rf_overcomplete({i + 1, k}) < rf_overcomplete({i, k}));
    }
  }
}

TEST_CASE("invalid queries raise domain errors") {
  CHECK_THROWS_AS(rf_undercomplete({0, 3}), std::domain_error);
  CHECK_THROWS_AS(rf_undercomplete({1, 0}), std::domain_error);
  CHECK_THROWS_AS(rf_undercomplete({1, 4}), std::domain_error);
  CHECK_THROWS_AS(rf_overcomplete({-2, 3}), std::domain_error);
}

TEST_CASE("rational rendering") {
  CHECK(rf_undercomplete({2, 3}).str() == "36");
  CHECK(rf_overcomplete({2, 3}).str() == "9/4");
}

TEST_CASE("schedule lands exactly on the overall scale factor") {
  const ScaleSchedule s = make_schedule(4, 2.0);
  CHECK(s.per_layer_factor == doctest::Approx(1.18921).epsilon(1e-5));
  const double want[4] = {1.18921, 1.41421, 1.68179, 2.00000};
  for (int l = 0; l < 4; ++l)
    CHECK(s.cumulative_scales[l] == doctest::Approx(want[l]).epsilon(1e-5));
  CHECK(std::fabs(s.cumulative_scales.back() - 2.0) < 1e-9);
}

TEST_CASE("unit scale factor degenerates to a flat schedule") {
  const ScaleSchedule s = make_schedule(4, 1.0);
  for (double c : s.cumulative_scales) CHECK(c == 1.0);
  CHECK(s.per_layer_factor == 1.0);
}

TEST_CASE("schedule sweep endpoints") {
  for (const double osf : {1.5, 2.0, 2.5}) {
    const ScaleSchedule s = make_schedule(4, osf);
    CHECK(std::fabs(s.cumulative_scales.back() - osf) < 1e-9);
  }
}

TEST_CASE("cumulative scales compose multiplicatively") {
  const ScaleSchedule s = make_schedule(5, 2.3);
  for (int l = 0; l < s.depth(); ++l)
    CHECK(std::fabs(s.cumulative_scales[l] - std::pow(s.per_layer_factor, l + 1)) < 1e-9);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(make_schedule(0, 2.0), std::domain_error);
  CHECK_THROWS_AS(make_schedule(4, 0.0), std::domain_error);
  CHECK_THROWS_AS(make_schedule(4, -1.0), std::domain_error);
}

TEST_CASE("scaled size rounds half up with a floor of one") {
  CHECK(scaled_size(2.0, 16) == 32);
  CHECK(scaled_size(2.5, 33) == 83);  // 82.5 rounds up
  CHECK(scaled_size(1.0, 7) == 7);
  CHECK(scaled_size(0.01, 3) == 1);
}
