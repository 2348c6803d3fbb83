#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mrfp/hrfp.hpp"
#include "mrfp/npplus.hpp"
#include "mrfp/rng.hpp"
#include "mrfp/spectral.hpp"
#include "oracles.hpp"

using namespace mrfp;

TEST_CASE("power spectrum matches the direct transform") {
  const Tensor x = oracle::random_tensor(1, 2, 8, 6, 1);
  for (int c = 0; c < 2; ++c) {
    const Eigen::MatrixXd fast = power_spectrum(x, 0, c);
    const Eigen::MatrixXd slow = oracle::dft_power(x, 0, c);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("total spectral energy obeys Parseval") {
  const Tensor x = oracle::random_tensor(1, 1, 16, 16, 2);
  const Eigen::MatrixXd p = power_spectrum(x, 0, 0);
  double spatial = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) spatial += x[i] * x[i];
  const double spectral = p.sum() / (16.0 * 16.0);
  CHECK(std::fabs(spectral - spatial) / spatial < 1e-6);
}

TEST_CASE("constant input concentrates at DC") {
  const Tensor x = Tensor::full(2, 3, 8, 8, 4.2);
  const BandEnergyReport r = band_energy(x);
  CHECK(r.energies[0] == doctest::Approx(1.0));
  CHECK(r.energies[1] == doctest::Approx(0.0));
  CHECK(r.energies[2] == doctest::Approx(0.0));
  CHECK(r.sample_count == 6);
}

TEST_CASE("checkerboard concentrates at the Nyquist corner") {
  Tensor x(1, 1, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int xx = 0; xx < 8; ++xx) x.at(0, 0, y, xx) = ((y + xx) % 2) ? 1.0 : -1.0;
  const BandEnergyReport r = band_energy(x);
  CHECK(r.energies[0] == doctest::Approx(0.0));
  CHECK(r.energies[1] == doctest::Approx(0.0));
  CHECK(r.energies[2] == doctest::Approx(1.0));
}

TEST_CASE("white noise spreads energy in proportion to band bin counts") {
  const int side = 64;
  // count frequency-grid bins per band
  double bins[3] = {0, 0, 0};
  for (int u = 0; u < side; ++u)
    for (int v = 0; v < side; ++v) {
      const int su = u <= side / 2 ? u : u - side;
      const int sv = v <= side / 2 ? v : v - side;
      double r = std::sqrt(static_cast<double>(su) * su + static_cast<double>(sv) * sv) /
                 (side / 2);
      if (r > 1.0) r = 1.0;
      bins[r < 1.0 / 3.0 ? 0 : (r < 2.0 / 3.0 ? 1 : 2)] += 1.0;
    }
  const double total_bins = bins[0] + bins[1] + bins[2];

  double acc[3] = {0, 0, 0};
  const int draws = 100;
  for (int d = 0; d < draws; ++d) {
    const BandEnergyReport r = band_energy(oracle::random_tensor(1, 1, side, side, 900 + d));
    for (int b = 0; b < 3; ++b) acc[b] += r.energies[b];
  }
  for (int b = 0; b < 3; ++b) {
    const double got = acc[b] / draws;
    const double want = bins[b] / total_bins;
    CHECK(std::fabs(got - want) / want < 0.05);
  }
}

TEST_CASE("energies always sum to one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BandEnergyReport r = band_energy(oracle::random_tensor(2, 3, 9, 7, seed));
    CHECK(std::fabs(r.energies[0] + r.energies[1] + r.energies[2] - 1.0) < 1e-9);
  }
}

TEST_CASE("circular shifts leave band energy unchanged") {
  const Tensor x = oracle::random_tensor(1, 2, 12, 12, 77);
  Tensor shifted(1, 2, 12, 12);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 12; ++y)
      for (int xx = 0; xx < 12; ++xx)
        shifted.at(0, c, (y + 5) % 12, (xx + 3) % 12) = x.at(0, c, y, xx);
  const BandEnergyReport a = band_energy(x);
  const BandEnergyReport b = band_energy(shifted);
  for (int i = 0; i < 3; ++i) CHECK(std::fabs(a.energies[i] - b.energies[i]) < 1e-9);
}

TEST_CASE("all-zero input is degenerate") {
  CHECK_THROWS_AS(band_energy(Tensor(1, 1, 8, 8)), std::domain_error);
  CHECK_THROWS_AS(band_energy(Tensor(1, 1, 1, 8)), std::invalid_argument);
}

TEST_CASE("band delta arithmetic") {
  BandEnergyReport a, b;
  a.energies = {1.0, 0.0, 0.0};
  b.energies = {0.0, 0.0, 1.0};
  const auto zero = band_delta(a, a);
  CHECK(zero == std::array<double, 3>{0.0, 0.0, 0.0});
  const auto d = band_delta(a, b);
  CHECK(d[0] == doctest::Approx(-1.0));
  CHECK(d[1] == doctest::Approx(0.0));
  CHECK(d[2] == doctest::Approx(1.0));

  BandEnergyReport c = b;
  c.band_edges = {0.0, 0.25, 0.5, 1.0};
  CHECK_THROWS_AS(band_delta(a, c), std::invalid_argument);
}

TEST_CASE("reports round-trip through their text file") {
  namespace fs = std::filesystem;
  BandEnergyReport r;
  r.energies = {0.61234567891234, 0.2, 0.18765432108766};
  r.sample_count = 48;
  const auto path = (fs::temp_directory_path() / "mrfp_band_report.txt").string();
  save_band_report(r, path);
  const BandEnergyReport loaded = load_band_report(path);
  CHECK(loaded.band_edges == r.band_edges);
  CHECK(loaded.energies == r.energies);
  CHECK(loaded.sample_count == r.sample_count);
  fs::remove(path);
}

TEST_CASE("style perturbation boosts the low band, the stack boosts the high band") {
  // statistical mirror of the frequency-presence diagnostic: smooth-ish
  // features, 20 perturbation seeds, one-sided sign test at p < 0.05
  const int seeds = 20;
  Tensor f0(4, 6, 24, 24);
  {
    Rng rng(3000);
    for (int n = 0; n < 4; ++n)
      for (int c = 0; c < 6; ++c) {
        const double fy = rng.uniform(0.5, 2.0), fx = rng.uniform(0.5, 2.0);
        const double ph = rng.uniform(0.0, 6.28);
        for (int y = 0; y < 24; ++y)
          for (int xx = 0; xx < 24; ++xx)
            f0.at(n, c, y, xx) =
                std::sin(2.0 * 3.14159265 * (fy * y + fx * xx) / 24.0 + ph) +
                0.05 * rng.gaussian() + 1.0;
      }
  }
  const BandEnergyReport clean = band_energy(f0);

  StackSpec spec;
  spec.channels = 6;
  spec.schedule = make_schedule(4, 2.0);

  int high_wins = 0, low_wins = 0;
  for (int s = 0; s < seeds; ++s) {
    const StyleCoeffs coeffs = sample_coeffs(4, 6, 1.0, 0.75, 4000 + s);
    const Tensor f_np = np_plus(f0, coeffs, channel_stats(f0));
    const auto d_np = band_delta(clean, band_energy(f_np));

    const RandomStack stack = sample_stack(spec, 5000 + s);
    const Tensor o1 = hrfp_forward(Var::constant(f0), stack).o1.value();
    const Tensor f_h = add(Var::constant(f0), Var::constant(o1)).value();
    const auto d_h = band_delta(clean, band_energy(f_h));

    if (d_h[2] > d_np[2]) high_wins++;
    if (d_np[0] > d_h[0]) low_wins++;
  }
  CHECK(oracle::sign_test_p(high_wins, seeds) < 0.05);
  CHECK(oracle::sign_test_p(low_wins, seeds) < 0.05);
}
