#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "mrfp/backbone.hpp"
#include "mrfp/hrfp.hpp"
#include "mrfp/npplus.hpp"

namespace mrfp {

// Fine-feature perturbation flavor. NP+ is toggled independently by p_np in
// every variant except kNone.
enum class Variant { kHrfp, kHrfpPlus, kScfp, kRgn, kLMrfp, kNone };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct PerturbConfig {
  double p_hrfp = 0.5;
  double p_np = 0.5;
  Variant variant = Variant::kHrfpPlus;
  double osf = 2.0;       // overall scale factor of the stack encoder
  double rgn_std = 0.1;   // gaussian-noise baseline only
  double np_mean = 1.0;
  double np_std = 0.75;
  double bn_init_std = 0.5;
  int hrfp_depth = 4;
  int hrfp_kernel = 3;
  std::uint64_t master_seed = 0;

  void validate() const;

  friend bool operator==(const PerturbConfig&, const PerturbConfig&) = default;
};

// Spatially consistent ablation: same stack, all scale factors 1.
PerturbConfig make_scfp(const PerturbConfig& config);

// Everything one training iteration needs to replay exactly.
struct IterationDraw {
  std::int64_t iteration = 0;
  bool hrfp_on = false;
  bool np_on = false;
  std::shared_ptr<const RandomStack> stack;  // null when unused this iteration
  std::uint64_t np_seed = 0;
  std::uint64_t rgn_seed = 0;
};

// Additive gaussian noise at the same hook HRFP uses.
Tensor rgn_perturb(const Tensor& x, double stddev, std::uint64_t seed);
Var rgn_perturb(const Var& x, double stddev, std::uint64_t seed);

// Wraps a backbone with the perturbation hooks. The training forward pass
// splices NP+ and the stack branches at the stage-0 tap (and the o2 branch at
// the decoder's penultimate tap in the plus variant); the evaluation path is
// a hard bypass straight into the unmodified backbone.
class WrappedModel {
 public:
  static WrappedModel wrap(Backbone backbone, const PerturbConfig& config);

  // Per-iteration toggles and weights: two Bernoulli draws from a stream
  // keyed by (master_seed, iteration), plus a freshly sampled stack when the
  // toggle fired (the learnable variant keeps one persistent stack instead).
  IterationDraw training_step_setup(std::int64_t iteration);

  Var forward_train(const Var& images, const IterationDraw& draw);
  Tensor forward_eval(const Tensor& images);

  Backbone& backbone() { return backbone_; }
  const Backbone& backbone() const { return backbone_; }
  const PerturbConfig& config() const { return cfg_; }
  const StackSpec& stack_spec() const { return stack_spec_; }

  std::vector<Parameter*> trainable_parameters();
  std::vector<Parameter*> weight_decay_parameters();  // backbone only
  std::size_t trainable_parameter_count() const;

  // Learnable-stack variant: the persistent stack assembled from the
  // current parameter values.
  RandomStack current_learnable_stack() const;

 private:
  WrappedModel(Backbone backbone, const PerturbConfig& config);

  Backbone backbone_;
  PerturbConfig cfg_;
  StackSpec stack_spec_;
  std::deque<Parameter> stack_params_;  // learnable variant only
};

}  // namespace mrfp
