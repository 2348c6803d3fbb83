#include "mrfp/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>

namespace mrfp {

namespace {

Eigen::MatrixXcd dft_matrix(int n) {
  Eigen::MatrixXcd f(n, n);
  const double w = -2.0 * 3.14159265358979323846 / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      f(i, j) = std::polar(1.0, w * i * j);
  return f;
}

// signed frequency index of DFT bin u for length n
int signed_freq(int u, int n) { return u <= n / 2 ? u : u - n; }

int band_of(int u, int v, int h, int w) {
  const double ny = h / 2 > 0 ? h / 2 : 1;
  const double nx = w / 2 > 0 ? w / 2 : 1;
  const double fy = signed_freq(u, h) / ny;
  const double fx = signed_freq(v, w) / nx;
  double r = std::sqrt(fy * fy + fx * fx);
  if (r > 1.0) r = 1.0;
  if (r < 1.0 / 3.0) return 0;
  if (r < 2.0 / 3.0) return 1;
  return 2;
}

}  // namespace

Eigen::MatrixXd power_spectrum(const Tensor& x, int n, int c) {
  const int h = x.h(), w = x.w();
  if (h < 2 || w < 2) throw std::invalid_argument("power_spectrum: spatial dims must be >= 2");
  Eigen::MatrixXd slice(h, w);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) slice(y, xx) = x.at(n, c, y, xx);
  const Eigen::MatrixXcd fh = dft_matrix(h);
  const Eigen::MatrixXcd fw = dft_matrix(w);
  const Eigen::MatrixXcd spec = fh * slice.cast<std::complex<double>>() * fw.transpose();
  return spec.cwiseAbs2();
}

BandEnergyReport band_energy(const Tensor& x) {
  const int h = x.h(), w = x.w();
  if (h < 2 || w < 2) throw std::invalid_argument("band_energy: spatial dims must be >= 2");

  BandEnergyReport report;
  double acc[3] = {0.0, 0.0, 0.0};
  std::int64_t slices = 0;
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const Eigen::MatrixXd p = power_spectrum(x, n, c);
      double bands[3] = {0.0, 0.0, 0.0};
      for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) bands[band_of(u, v, h, w)] += p(u, v);
      const double total = bands[0] + bands[1] + bands[2];
      if (total <= 0.0) continue;  // an all-zero slice carries no spectrum
      for (int b = 0; b < 3; ++b) acc[b] += bands[b] / total;
      slices++;
    }
  if (slices == 0) throw std::domain_error("band_energy: input has zero total energy");
  for (int b = 0; b < 3; ++b) report.energies[b] = acc[b] / slices;
  report.sample_count = slices;
  return report;
}

std::array<double, 3> band_delta(const BandEnergyReport& before,
                                 const BandEnergyReport& after) {
  if (before.band_edges != after.band_edges)
    throw std::invalid_argument("band_delta: band edges differ");
  return {after.energies[0] - before.energies[0], after.energies[1] - before.energies[1],
          after.energies[2] - before.energies[2]};
}

void save_band_report(const BandEnergyReport& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_band_report: cannot open " + path);
  os.precision(17);
  os << "band_edges:";
  for (double e : r.band_edges) os << ' ' << e;
  os << "\nenergies:";
  for (double e : r.energies) os << ' ' << e;
  os << "\nsample_count: " << r.sample_count << '\n';
}

BandEnergyReport load_band_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_band_report: cannot open " + path);
  BandEnergyReport r;
  std::string key;
  is >> key;
  if (key != "band_edges:") throw std::runtime_error("load_band_report: bad format");
  for (double& e : r.band_edges) is >> e;
  is >> key;
  if (key != "energies:") throw std::runtime_error("load_band_report: bad format");
  for (double& e : r.energies) is >> e;
  is >> key >> r.sample_count;
  if (!is) throw std::runtime_error("load_band_report: truncated " + path);
  return r;
}

}  // namespace mrfp
