#include <doctest.h>

#include <cmath>

#include "mrfp/npplus.hpp"
#include "mrfp/rng.hpp"
#include "oracles.hpp"

using namespace mrfp;

TEST_CASE("channel statistics of a constant tensor") {
  const Tensor x = Tensor::full(2, 3, 4, 4, 5.0);
  const ChannelStats s = channel_stats(x);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      CHECK(s.mu(n, c) == 5.0);
      CHECK(s.sigma(n, c) == doctest::Approx(std::sqrt(kStatsEps)));
    }
  for (int c = 0; c < 3; ++c) {
    CHECK(s.delta_raw(c) == 0.0);
    CHECK(s.delta_norm(c) == 0.0);
  }
}

TEST_CASE("batch statistic variance, two-sample hand case") {
  // per-sample means 0 and 2 -> batch mean 1, variance 1, normalized 1
  Tensor x(2, 1, 1, 2);
  x.at(0, 0, 0, 0) = -1.0;
  x.at(0, 0, 0, 1) = 1.0;  // mean 0
  x.at(1, 0, 0, 0) = 1.0;
  x.at(1, 0, 0, 1) = 3.0;  // mean 2
  const ChannelStats s = channel_stats(x);
  CHECK(s.mu(0, 0) == doctest::Approx(0.0));
  CHECK(s.mu(1, 0) == doctest::Approx(2.0));
  CHECK(s.delta_raw(0) == doctest::Approx(1.0));
  CHECK(s.delta_norm(0) == doctest::Approx(1.0));
}

TEST_CASE("normalization divides by the max across channels") {
  // channel means {0,2} and {0,4}: raw [1,4], normalized [0.25,1]
  Tensor x(2, 2, 1, 1);
  x.at(0, 0, 0, 0) = 0.0;
  x.at(1, 0, 0, 0) = 2.0;
  x.at(0, 1, 0, 0) = 0.0;
  x.at(1, 1, 0, 0) = 4.0;
  const ChannelStats s = channel_stats(x);
  CHECK(s.delta_raw(0) == doctest::Approx(1.0));
  CHECK(s.delta_raw(1) == doctest::Approx(4.0));
  CHECK(s.delta_norm(0) == doctest::Approx(0.25));
  CHECK(s.delta_norm(1) == doctest::Approx(1.0));
}

TEST_CASE("normalized variance always lies in [0,1] and tops out at 1") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = oracle::random_tensor(3, 5, 4, 6, seed);
    const ChannelStats s = channel_stats(x);
    double top = 0.0;
    for (int c = 0; c < 5; ++c) {
      CHECK(s.delta_norm(c) >= 0.0);
      CHECK(s.delta_norm(c) <= 1.0);
      top = std::max(top, s.delta_norm(c));
    }
    CHECK(top == doctest::Approx(1.0));
  }
}

TEST_CASE("degenerate gaussian gives constant coefficients") {
  const StyleCoeffs c = sample_coeffs(3, 4, 1.0, 0.0, 9);
  for (int n = 0; n < 3; ++n)
    for (int ch = 0; ch < 4; ++ch) {
      CHECK(c.alpha(n, ch) == 1.0);
      CHECK(c.beta(n, ch) == 1.0);
    }
}

TEST_CASE("coefficient sampling is deterministic per seed") {
  const StyleCoeffs a = sample_coeffs(4, 8, 1.0, 0.75, 123);
  const StyleCoeffs b = sample_coeffs(4, 8, 1.0, 0.75, 123);
  CHECK(a.alpha == b.alpha);
  CHECK(a.beta == b.beta);
  const StyleCoeffs c = sample_coeffs(4, 8, 1.0, 0.75, 124);
  CHECK_FALSE(a.alpha == c.alpha);
}

TEST_CASE("coefficient distribution hits the configured mean") {
  // ~10^6 draws: empirical mean within 0.01 of 1.0
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const StyleCoeffs c = sample_coeffs(250, 250, 1.0, 0.75, 500 + seed);
    sum += c.alpha.sum() + c.beta.sum();
    count += 2 * 250 * 250;
  }
  REQUIRE(count >= 1000000);
  CHECK(sum / count == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("identity coefficients leave the tensor untouched, bitwise") {
  const Tensor x = oracle::random_tensor(2, 3, 5, 5, 31);
  const StyleCoeffs c = sample_coeffs(2, 3, 1.0, 0.0, 1);
  const ChannelStats s = channel_stats(x);
  CHECK(np_plus(x, c, s) == x);
}

TEST_CASE("zero statistic variance degenerates to a pure rescale") {
  // integer values over a power-of-two area: spatial means are exact, so
  // mirroring sample 0 into sample 1 gives exactly equal channel means
  Tensor x(2, 2, 4, 4);
  Rng irng(32);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 4; ++xx) {
        x.at(0, c, y, xx) = static_cast<double>(irng.uniform_int(-8, 8));
        x.at(1, c, 3 - y, 3 - xx) = x.at(0, c, y, xx);
      }
  const ChannelStats s = channel_stats(x);
  for (int c = 0; c < 2; ++c) CHECK(s.delta_norm(c) == 0.0);

  const StyleCoeffs coeffs = sample_coeffs(2, 2, 1.0, 0.75, 2);
  const Tensor y = np_plus(x, coeffs, s);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 2; ++c)
      for (int yy = 0; yy < 4; ++yy)
        for (int xx = 0; xx < 4; ++xx)
          CHECK(y.at(n, c, yy, xx) ==
                doctest::Approx(coeffs.alpha(n, c) * x.at(n, c, yy, xx)).epsilon(1e-12));
}

TEST_CASE("hand-evaluated perturbation") {
  // x = [[1,3],[5,7]], mu 4, alpha 2, beta 0.5, delta 1 -> 2x - 6
  Tensor x(1, 1, 2, 2);
  x.at(0, 0, 0, 0) = 1.0;
  x.at(0, 0, 0, 1) = 3.0;
  x.at(0, 0, 1, 0) = 5.0;
  x.at(0, 0, 1, 1) = 7.0;
  StyleCoeffs c = sample_coeffs(1, 1, 0.0, 0.0, 0);
  c.alpha(0, 0) = 2.0;
  c.beta(0, 0) = 0.5;
  ChannelStats s = channel_stats(x);
  s.delta_norm(0) = 1.0;  // forced, as a single sample alone gives delta 0
  const Tensor y = np_plus(x, c, s);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(-4.0));
  CHECK(y.at(0, 0, 0, 1) == doctest::Approx(0.0));
  CHECK(y.at(0, 0, 1, 0) == doctest::Approx(4.0));
  CHECK(y.at(0, 0, 1, 1) == doctest::Approx(8.0));
}

TEST_CASE("full-variance form equals the explicit renormalization") {
  // with delta forced to 1: alpha*x + (beta-alpha)*mu  ==  s*(x-mu)/sigma + m
  // under s = alpha*sigma, m = beta*mu
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int b = 1 + static_cast<int>(seed % 3);
    const Tensor x = oracle::random_tensor(b, 4, 6, 6, 100 + seed);
    const StyleCoeffs c = sample_coeffs(b, 4, 1.0, 0.75, 200 + seed);
    ChannelStats s = channel_stats(x);
    s.delta_norm.setOnes();
    const Tensor got = np_plus(x, c, s);
    for (int n = 0; n < b; ++n)
      for (int ch = 0; ch < 4; ++ch) {
        const double sigma_s = c.alpha(n, ch) * s.sigma(n, ch);
        const double mu_s = c.beta(n, ch) * s.mu(n, ch);
        for (int y = 0; y < 6; ++y)
          for (int xx = 0; xx < 6; ++xx) {
            const double want =
                sigma_s * (x.at(n, ch, y, xx) - s.mu(n, ch)) / s.sigma(n, ch) + mu_s;
            CHECK(std::fabs(got.at(n, ch, y, xx) - want) < 1e-6);
          }
      }
  }
}

TEST_CASE("spatial mean transforms as alpha*mu + delta*(beta-alpha)*mu") {
  const Tensor x = oracle::random_tensor(3, 4, 5, 5, 60);
  const StyleCoeffs c = sample_coeffs(3, 4, 1.0, 0.75, 61);
  const ChannelStats s = channel_stats(x);
  const ChannelStats sy = channel_stats(np_plus(x, c, s));
  for (int n = 0; n < 3; ++n)
    for (int ch = 0; ch < 4; ++ch) {
      const double want = c.alpha(n, ch) * s.mu(n, ch) +
                          s.delta_norm(ch) * (c.beta(n, ch) - c.alpha(n, ch)) * s.mu(n, ch);
      CHECK(sy.mu(n, ch) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("batch permutation permutes outputs identically") {
  const Tensor x = oracle::random_tensor(3, 2, 4, 4, 70);
  const StyleCoeffs c = sample_coeffs(3, 2, 1.0, 0.75, 71);
  const Tensor y = np_plus(x, c, channel_stats(x));

  const int perm[3] = {2, 0, 1};
  Tensor xp(3, 2, 4, 4);
  StyleCoeffs cp = c;
  for (int n = 0; n < 3; ++n) {
    for (int ch = 0; ch < 2; ++ch) {
      cp.alpha(n, ch) = c.alpha(perm[n], ch);
      cp.beta(n, ch) = c.beta(perm[n], ch);
      for (int yy = 0; yy < 4; ++yy)
        for (int xx = 0; xx < 4; ++xx) xp.at(n, ch, yy, xx) = x.at(perm[n], ch, yy, xx);
    }
  }
  const Tensor yp = np_plus(xp, cp, channel_stats(xp));
  for (int n = 0; n < 3; ++n)
    for (int ch = 0; ch < 2; ++ch)
      for (int yy = 0; yy < 4; ++yy)
        for (int xx = 0; xx < 4; ++xx)
          CHECK(yp.at(n, ch, yy, xx) == doctest::Approx(y.at(perm[n], ch, yy, xx)));
}

TEST_CASE("graph route matches the value route and differentiates") {
  const Tensor x = oracle::random_tensor(3, 4, 5, 5, 80);
  const StyleCoeffs c = sample_coeffs(3, 4, 1.0, 0.75, 81);

  const Tensor direct = np_plus(x, c, channel_stats(x, 0.0));
  Parameter px("x", x);
  const Var graph = np_plus(Var::leaf(px), c);
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(graph.value()[i] == doctest::Approx(direct[i]).epsilon(1e-12));

  auto loss_fn = [&]() {
    Var v = np_plus(Var::leaf(px), c);
    return sum_all(mul(v, v)).value()[0];
  };
  Var v = np_plus(Var::leaf(px), c);
  backward(sum_all(mul(v, v)));
  CHECK(oracle::fd_check(px.value, px.grad, loss_fn, 1e-6).max_rel_err < 1e-4);
}

TEST_CASE("shape validation") {
  const Tensor x = oracle::random_tensor(2, 3, 4, 4, 90);
  const StyleCoeffs small = sample_coeffs(1, 3, 1.0, 0.75, 91);
  CHECK_THROWS_AS(np_plus(x, small, channel_stats(x)), std::invalid_argument);
}
