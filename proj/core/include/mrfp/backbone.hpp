#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mrfp/autodiff.hpp"
#include "mrfp/tensor.hpp"

namespace mrfp {

// Encoder-decoder segmentation model at desk scale: four stride-2 conv
// stages, a mirrored upsample+conv decoder ending in a named penultimate
// layer, and a 1x1 classification head whose logits are resized back to the
// input resolution.
struct BackboneSpec {
  std::vector<int> stage_widths{16, 32, 64, 64};
  int in_channels = 3;
  int num_classes = 5;
  int kernel_side = 3;
  // Instance norms after the first three encoder stages (affine), the
  // reference configuration for the HRFP+ wrapper.
  bool with_instance_norms = false;
  double norm_eps = 1e-5;
  std::vector<std::string> hooks{"encoder.stage0", "decoder.penultimate"};

  void validate() const;

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

class Backbone {
 public:
  Backbone(const BackboneSpec& spec, std::uint64_t seed);

  // Transform spliced into the forward pass at a named tap; receives the tap
  // output and returns what flows on.
  using HookFn = std::function<Var(const Var&)>;
  using HookMap = std::map<std::string, HookFn>;

  struct Forward {
    std::map<std::string, Var> taps;  // clean tap outputs by name
    Var logits;
  };

  // trainable=true binds parameters as differentiable leaves.
  Forward forward(const Var& images, bool trainable, const HookMap* hooks = nullptr);
  Tensor forward_eval(const Tensor& images);

  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  const BackboneSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  bool has_hook(const std::string& name) const;

  // Appends affine instance norms after the first three encoder stages.
  void add_instance_norms();

 private:
  Var maybe_hook(const std::string& name, Var v, Forward& fwd, const HookMap* hooks);

  BackboneSpec spec_;
  std::uint64_t seed_;
  std::deque<Parameter> params_;  // stable addresses
  struct ConvIdx {
    int w = -1, b = -1;
  };
  std::vector<ConvIdx> enc_;
  std::vector<ConvIdx> dec_;
  ConvIdx head_;
  std::vector<ConvIdx> in_affine_;  // gamma/beta pairs, one per instance norm
};

}  // namespace mrfp
