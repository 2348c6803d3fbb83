#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

#include "mrfp/tensor.hpp"

namespace mrfp {

// Relative spectral energy in three radial frequency bands (thirds of the
// normalized Nyquist radius, DC in the low band), averaged over the batch
// and channel slices.
struct BandEnergyReport {
  std::array<double, 4> band_edges{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  std::array<double, 3> energies{};
  std::int64_t sample_count = 0;  // (batch, channel) slices averaged
};

BandEnergyReport band_energy(const Tensor& x);

// after.energies - before.energies, elementwise
std::array<double, 3> band_delta(const BandEnergyReport& before,
                                 const BandEnergyReport& after);

// |DFT|^2 of one (batch, channel) slice; diagnostics and test support.
Eigen::MatrixXd power_spectrum(const Tensor& x, int n, int c);

void save_band_report(const BandEnergyReport& r, const std::string& path);
BandEnergyReport load_band_report(const std::string& path);

}  // namespace mrfp
