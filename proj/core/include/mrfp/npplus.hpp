#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "mrfp/autodiff.hpp"
#include "mrfp/tensor.hpp"

namespace mrfp {

inline constexpr double kStatsEps = 1e-5;

// Per-sample per-channel spatial statistics plus the batch statistic
// variance of the channel means and its max-normalized form.
struct ChannelStats {
  Eigen::MatrixXd mu;         // B x C spatial means
  Eigen::MatrixXd sigma;      // B x C, sqrt(spatial variance + eps)
  Eigen::VectorXd delta_raw;  // C, variance of mu across the batch
  Eigen::VectorXd delta_norm; // C in [0,1]; all zero when delta_raw is
};

ChannelStats channel_stats(const Tensor& x, double eps = kStatsEps);

// Per-sample per-channel style coefficients, i.i.d. gaussian.
struct StyleCoeffs {
  Eigen::MatrixXd alpha;  // B x C
  Eigen::MatrixXd beta;   // B x C
  double mean = 1.0;
  double stddev = 0.75;
  std::uint64_t seed = 0;
};

StyleCoeffs sample_coeffs(int batch, int channels, double mean, double stddev,
                          std::uint64_t seed);

// Normalized channel-statistics perturbation:
//   y[b,c] = alpha[b,c] * x[b,c] + delta[c] * (beta[b,c] - alpha[b,c]) * mu[b,c]
Tensor np_plus(const Tensor& x, const StyleCoeffs& coeffs, const ChannelStats& stats);

// Graph route: statistics are recomputed from x inside the graph so the
// perturbation stays differentiable through them.
Var np_plus(const Var& x, const StyleCoeffs& coeffs);

}  // namespace mrfp
