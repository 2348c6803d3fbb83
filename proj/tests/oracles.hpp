// Independent reference implementations used as test oracles. Everything here
// is written the slow, obvious way and must stay decoupled from the library
// code paths it checks.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "mrfp/autodiff.hpp"
#include "mrfp/rng.hpp"
#include "mrfp/tensor.hpp"

namespace oracle {

inline mrfp::Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed,
                                  double mean = 0.0, double stddev = 1.0) {
  mrfp::Tensor t(n, c, h, w);
  mrfp::Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian(mean, stddev);
  return t;
}

// Direct seven-loop convolution, zero padding.
inline mrfp::Tensor conv2d(const mrfp::Tensor& x, const mrfp::Tensor& w,
                           const mrfp::Tensor* bias, int stride, int pad) {
  const int ho = (x.h() + 2 * pad - w.h()) / stride + 1;
  const int wo = (x.w() + 2 * pad - w.w()) / stride + 1;
  mrfp::Tensor out(x.n(), w.n(), ho, wo);
  for (int n = 0; n < x.n(); ++n)
    for (int co = 0; co < w.n(); ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = bias ? bias->at(0, co, 0, 0) : 0.0;
          for (int ci = 0; ci < x.c(); ++ci)
            for (int ky = 0; ky < w.h(); ++ky)
              for (int kx = 0; kx < w.w(); ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                acc += x.at(n, ci, iy, ix) * w.at(co, ci, ky, kx);
              }
          out.at(n, co, oy, ox) = acc;
        }
  return out;
}

// Direct bilinear interpolation, half-pixel centers with edge clamping.
inline mrfp::Tensor bilinear(const mrfp::Tensor& x, int oh, int ow) {
  mrfp::Tensor out(x.n(), x.c(), oh, ow);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double sy = (oy + 0.5) * x.h() / oh - 0.5;
          double sx = (ox + 0.5) * x.w() / ow - 0.5;
          sy = std::max(0.0, sy);
          sx = std::max(0.0, sx);
          int y0 = static_cast<int>(std::floor(sy));
          int x0 = static_cast<int>(std::floor(sx));
          double fy = sy - y0, fx = sx - x0;
          if (y0 >= x.h() - 1) { y0 = x.h() - 1; fy = 0.0; }
          if (x0 >= x.w() - 1) { x0 = x.w() - 1; fx = 0.0; }
          const int y1 = std::min(y0 + 1, x.h() - 1);
          const int x1 = std::min(x0 + 1, x.w() - 1);
          out.at(n, c, oy, ox) =
              (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) + fx * x.at(n, c, y0, x1)) +
              fy * ((1 - fx) * x.at(n, c, y1, x0) + fx * x.at(n, c, y1, x1));
        }
  return out;
}

// O(N^2 M^2) discrete Fourier transform power of one slice.
inline Eigen::MatrixXd dft_power(const mrfp::Tensor& x, int n, int c) {
  const int h = x.h(), w = x.w();
  Eigen::MatrixXd p(h, w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      std::complex<double> acc(0.0, 0.0);
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double phase = -2.0 * 3.14159265358979323846 *
                               (static_cast<double>(u) * y / h +
                                static_cast<double>(v) * xx / w);
          acc += x.at(n, c, y, xx) * std::complex<double>(std::cos(phase), std::sin(phase));
        }
      p(u, v) = std::norm(acc);
    }
  return p;
}

// Central finite differences of a scalar function against an analytic
// gradient, reported as the worst relative error over all entries.
struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

inline GradCheck fd_check(mrfp::Tensor& values, const mrfp::Tensor& analytic,
                          const std::function<double()>& loss_fn, double step = 1e-5,
                          double floor_scale = 1e-8) {
  GradCheck result;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    const double h = step * std::max(1.0, std::fabs(saved));
    values[i] = saved + h;
    const double up = loss_fn();
    values[i] = saved - h;
    const double down = loss_fn();
    values[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::fabs(fd), std::fabs(a), floor_scale});
    const double rel = std::fabs(fd - a) / denom;
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_index = i;
    }
  }
  return result;
}

// Naive confusion counting: per-pixel loops, no shared code with the library.
struct NaiveIoU {
  std::vector<double> per_class;  // NaN for absent classes
  double mean = 0.0;
};

inline NaiveIoU naive_miou(const std::vector<mrfp::LabelMap>& gts,
                           const std::vector<mrfp::LabelMap>& preds, int k, int ignore) {
  std::vector<long long> inter(k, 0), gt_count(k, 0), pred_count(k, 0);
  for (std::size_t s = 0; s < gts.size(); ++s)
    for (std::size_t i = 0; i < gts[s].v.size(); ++i) {
      const int g = gts[s].v[i];
      if (g == ignore) continue;
      const int p = preds[s].v[i];
      gt_count[g]++;
      pred_count[p]++;
      if (g == p) inter[g]++;
    }
  NaiveIoU out;
  out.per_class.assign(k, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    const long long uni = gt_count[c] + pred_count[c] - inter[c];
    if (uni == 0) continue;
    out.per_class[c] = static_cast<double>(inter[c]) / static_cast<double>(uni);
    sum += out.per_class[c];
    present++;
  }
  out.mean = present ? sum / present : 0.0;
  return out;
}

// Direct double-sum MMD with its own median bandwidth computation.
inline double naive_mmd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(b.rows());
  std::vector<Eigen::VectorXd> pool;
  for (int i = 0; i < n; ++i) pool.push_back(a.row(i));
  for (int i = 0; i < m; ++i) pool.push_back(b.row(i));
  std::vector<double> d;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      d.push_back((pool[i] - pool[j]).norm());
  std::sort(d.begin(), d.end());
  double h = d[d.size() / 2];
  if (!(h > 0.0)) h = 1.0;
  const double gamma = 1.0 / (2.0 * h * h);
  auto k = [gamma](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return std::exp(-gamma * (x - y).squaredNorm());
  };
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kaa += k(pool[i], pool[j]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) kbb += k(pool[n + i], pool[n + j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) kab += k(pool[i], pool[n + j]);
  const double v = kaa / (static_cast<double>(n) * n) + kbb / (static_cast<double>(m) * m) -
                   2.0 * kab / (static_cast<double>(n) * m);
  return v > 0.0 ? v : 0.0;
}

// One-sided sign-test tail: P[X >= successes] for X ~ Binomial(trials, 1/2).
inline double sign_test_p(int successes, int trials) {
  double p = 0.0;
  for (int j = successes; j <= trials; ++j) {
    double logc = 0.0;
    for (int i = 0; i < j; ++i)
      logc += std::log(static_cast<double>(trials - i)) - std::log(static_cast<double>(i + 1));
    p += std::exp(logc - trials * std::log(2.0));
  }
  return p;
}

}  // namespace oracle
