#pragma once

#include <vector>

#include "mrfp/rational.hpp"

namespace mrfp {

// Receptive-field query for layer i (1-based) of an alternating
// pool/upsample stack with k x k kernels.
struct RfQuery {
  int layer_index = 1;  // i >= 1
  int kernel_side = 3;  // k >= 1, odd
};

// Receptive-field area in pixels^2, exact. Pooling stacks quadruple the area
// per layer; 2x upsampling stacks quarter it.
Rational rf_undercomplete(const RfQuery& q);  // 4^(i-1) * k^2
Rational rf_overcomplete(const RfQuery& q);   // k^2 / 4^(i-1)

// Per-layer bilinear scale factors for an overcomplete encoder that reaches
// exactly `overall_scale_factor` times its input size at the last layer.
struct ScaleSchedule {
  double per_layer_factor = 1.0;
  std::vector<double> cumulative_scales;  // one entry per encoder layer
  double overall_scale_factor = 1.0;

  int depth() const { return static_cast<int>(cumulative_scales.size()); }

  friend bool operator==(const ScaleSchedule&, const ScaleSchedule&) = default;
};

ScaleSchedule make_schedule(int depth, double osf);

// round-half-up of scale*size with a floor of 1
int scaled_size(double scale, int size);

}  // namespace mrfp
