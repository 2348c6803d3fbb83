#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrfp/autodiff.hpp"
#include "mrfp/rf_geometry.hpp"
#include "mrfp/tensor.hpp"

namespace mrfp {

// Layout of a high-resolution feature-perturbation stack: a non-learnable
// overcomplete conv/BN autoencoder. The encoder upsamples each layer by the
// schedule's per-layer factor and the decoder walks the sizes back down.
struct StackSpec {
  int depth_encoder = 4;
  int depth_decoder = 4;
  int kernel_side = 3;
  int channels = 0;     // channel count of the hooked stage
  int o2_channels = 0;  // channel count expected by the o2 target (0: same)
  ScaleSchedule schedule;
  double bn_init_std = 0.5;
  // Rectifier between layers (it is what lets the stack generate frequency
  // content the input lacks); the final decoder layer stays linear.
  bool interlayer_relu = true;
  // Test support: run the batch-norm layers affine-only (no statistics).
  bool bn_stats_bypass = false;

  void validate() const;

  friend bool operator==(const StackSpec&, const StackSpec&) = default;
};

// Sampled weights for one stack. Regeneration from (spec, seed) is
// bit-identical; none of this is learnable unless a wrapper explicitly
// registers it (the L-MRFP ablation).
struct RandomStack {
  StackSpec spec;
  std::vector<Tensor> conv_weights;  // encoder layers then decoder layers
  std::vector<Tensor> bn_gammas;     // (1,C,1,1) each
  std::vector<Tensor> bn_betas;
  Tensor o2_adapter;  // (o2_channels, channels, 1, 1); resized bilinearly first
  std::uint64_t seed = 0;

  std::size_t parameter_count() const;

  friend bool operator==(const RandomStack&, const RandomStack&) = default;
};

// Conv weights are He-initialized; batch-norm gamma/beta are drawn from a
// zero-mean gaussian with std spec.bn_init_std.
RandomStack sample_stack(const StackSpec& spec, std::uint64_t seed);

struct HrfpOut {
  Var o1;  // decoder output, exactly the input's shape
  Var o2;  // largest upsampled encoder activation
};

HrfpOut hrfp_forward(const Var& x, const RandomStack& stack);

// Same forward with caller-supplied weight vars (learnable-stack mode).
HrfpOut hrfp_forward_with(const Var& x, const StackSpec& spec,
                          const std::vector<Var>& conv_weights,
                          const std::vector<Var>& gammas, const std::vector<Var>& betas);

// Perturbation splices: elementwise addition at the hooks.
Var apply_o1(const Var& stage0_out, const Var& o1);
Var apply_o2(const Var& decoder_penult, const Var& o2, const Var& adapter);
Var apply_o2(const Var& decoder_penult, const Var& o2, const RandomStack& stack);

// Flat binary snapshot (spec header + weight blobs) for exact replay.
void save_stack(const RandomStack& stack, const std::string& path);
RandomStack load_stack(const std::string& path);

}  // namespace mrfp
