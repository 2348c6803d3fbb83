#include "mrfp/npplus.hpp"

#include <cmath>
#include <stdexcept>

#include "mrfp/rng.hpp"

namespace mrfp {

ChannelStats channel_stats(const Tensor& x, double eps) {
  const int b = x.n(), c = x.c();
  const std::size_t area = static_cast<std::size_t>(x.h()) * x.w();
  if (area == 0) throw std::invalid_argument("channel_stats: empty spatial extent");

  ChannelStats s;
  s.mu.resize(b, c);
  s.sigma.resize(b, c);
  for (int n = 0; n < b; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const double* p = x.data() + x.index(n, ch, 0, 0);
      double mean = 0.0;
      for (std::size_t i = 0; i < area; ++i) mean += p[i];
      mean /= static_cast<double>(area);
      double var = 0.0;
      for (std::size_t i = 0; i < area; ++i) {
        const double d = p[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(area);
      s.mu(n, ch) = mean;
      s.sigma(n, ch) = std::sqrt(var + eps);
    }

  s.delta_raw.resize(c);
  s.delta_norm.resize(c);
  for (int ch = 0; ch < c; ++ch) {
    const double mu_tilde = s.mu.col(ch).mean();
    double d = 0.0;
    for (int n = 0; n < b; ++n) {
      const double e = s.mu(n, ch) - mu_tilde;
      d += e * e;
    }
    s.delta_raw(ch) = d / b;
  }
  const double dmax = s.delta_raw.maxCoeff();
  // all channel means equal across the batch: the normalization is 0/0,
  // resolved to 0 so the perturbation degenerates to a pure rescale
  if (dmax > 0.0)
    s.delta_norm = s.delta_raw / dmax;
  else
    s.delta_norm.setZero();
  return s;
}

StyleCoeffs sample_coeffs(int batch, int channels, double mean, double stddev,
                          std::uint64_t seed) {
  if (batch < 1 || channels < 1) throw std::invalid_argument("sample_coeffs: bad shape");
  if (!(stddev >= 0.0)) throw std::invalid_argument("sample_coeffs: negative stddev");
  StyleCoeffs c;
  c.mean = mean;
  c.stddev = stddev;
  c.seed = seed;
  c.alpha.resize(batch, channels);
  c.beta.resize(batch, channels);
  Rng rng(seed);
  for (int n = 0; n < batch; ++n)
    for (int ch = 0; ch < channels; ++ch) c.alpha(n, ch) = rng.gaussian(mean, stddev);
  for (int n = 0; n < batch; ++n)
    for (int ch = 0; ch < channels; ++ch) c.beta(n, ch) = rng.gaussian(mean, stddev);
  return c;
}

Tensor np_plus(const Tensor& x, const StyleCoeffs& coeffs, const ChannelStats& stats) {
  const int b = x.n(), c = x.c();
  if (coeffs.alpha.rows() != b || coeffs.alpha.cols() != c ||
      coeffs.beta.rows() != b || coeffs.beta.cols() != c)
    throw std::invalid_argument("np_plus: coefficient shape mismatch");
  if (stats.mu.rows() != b || stats.mu.cols() != c ||
      stats.delta_norm.size() != c)
    throw std::invalid_argument("np_plus: stats shape mismatch");

  Tensor y(b, c, x.h(), x.w());
  const std::size_t area = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < b; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const double a = coeffs.alpha(n, ch);
      const double shift =
          stats.delta_norm(ch) * (coeffs.beta(n, ch) - a) * stats.mu(n, ch);
      const double* px = x.data() + x.index(n, ch, 0, 0);
      double* py = y.data() + y.index(n, ch, 0, 0);
      for (std::size_t i = 0; i < area; ++i) py[i] = a * px[i] + shift;
    }
  return y;
}

Var np_plus(const Var& x, const StyleCoeffs& coeffs) {
  const Tensor& xv = x.value();
  const int b = xv.n(), c = xv.c();
  if (coeffs.alpha.rows() != b || coeffs.alpha.cols() != c)
    throw std::invalid_argument("np_plus: coefficient shape mismatch");

  Tensor at(b, c, 1, 1), bt(b, c, 1, 1);
  for (int n = 0; n < b; ++n)
    for (int ch = 0; ch < c; ++ch) {
      at.at(n, ch, 0, 0) = coeffs.alpha(n, ch);
      bt.at(n, ch, 0, 0) = coeffs.beta(n, ch);
    }
  Var alpha = Var::constant(std::move(at));
  Var beta = Var::constant(std::move(bt));

  Var mu = reduce_mean(x, {false, false, true, true});          // (B,C,1,1)
  Var mu_tilde = reduce_mean(mu, {true, false, false, false});  // (1,C,1,1)
  Var dev = sub(mu, mu_tilde);
  Var delta_raw = reduce_mean(mul(dev, dev), {true, false, false, false});
  Var dmax = reduce_max(delta_raw, {false, true, false, false});
  Var delta = dmax.value()[0] > 0.0 ? div(delta_raw, dmax)
                                    : Var::constant(Tensor(1, c, 1, 1));
  Var shift = mul(mul(delta, sub(beta, alpha)), mu);  // (B,C,1,1)
  return add(mul(x, alpha), shift);
}

}  // namespace mrfp
