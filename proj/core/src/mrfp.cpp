#include "mrfp/mrfp.hpp"

#include <stdexcept>

#include "mrfp/rng.hpp"

namespace mrfp {

namespace {
constexpr std::uint64_t kTagToggle = 0x746f67;  // per-iteration Bernoulli stream
constexpr std::uint64_t kTagStack = 0x73746b;
constexpr std::uint64_t kTagNp = 0x6e70;
constexpr std::uint64_t kTagRgn = 0x72676e;
}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kHrfp: return "hrfp";
    case Variant::kHrfpPlus: return "hrfp_plus";
    case Variant::kScfp: return "scfp";
    case Variant::kRgn: return "rgn";
    case Variant::kLMrfp: return "l_mrfp";
    case Variant::kNone: return "none";
  }
  throw std::logic_error("to_string: bad variant");
}

Variant parse_variant(const std::string& s) {
  if (s == "hrfp") return Variant::kHrfp;
  if (s == "hrfp_plus") return Variant::kHrfpPlus;
  if (s == "scfp") return Variant::kScfp;
  if (s == "rgn") return Variant::kRgn;
  if (s == "l_mrfp") return Variant::kLMrfp;
  if (s == "none") return Variant::kNone;
  throw std::invalid_argument("unknown variant: " + s);
}

void PerturbConfig::validate() const {
  if (!(p_hrfp >= 0.0 && p_hrfp <= 1.0) || !(p_np >= 0.0 && p_np <= 1.0))
    throw std::invalid_argument("PerturbConfig: probabilities must be in [0,1]");
  if (!(osf > 0.0)) throw std::invalid_argument("PerturbConfig: osf must be positive");
  if (!(np_std >= 0.0) || !(bn_init_std >= 0.0))
    throw std::invalid_argument("PerturbConfig: negative std");
  if (variant == Variant::kRgn && !(rgn_std >= 0.0))
    throw std::invalid_argument("PerturbConfig: rgn_std must be >= 0");
  if (hrfp_depth < 1 || hrfp_kernel < 1 || hrfp_kernel % 2 == 0)
    throw std::invalid_argument("PerturbConfig: bad stack geometry");
}

PerturbConfig make_scfp(const PerturbConfig& config) {
  PerturbConfig c = config;
  c.osf = 1.0;
  c.variant = Variant::kScfp;
  return c;
}

Tensor rgn_perturb(const Tensor& x, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("rgn_perturb: negative std");
  Rng rng(seed);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += stddev * rng.gaussian();
  return out;
}

Var rgn_perturb(const Var& x, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("rgn_perturb: negative std");
  const Tensor& xv = x.value();
  Tensor noise(xv.n(), xv.c(), xv.h(), xv.w());
  Rng rng(seed);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = stddev * rng.gaussian();
  return add(x, Var::constant(std::move(noise)));
}

WrappedModel::WrappedModel(Backbone backbone, const PerturbConfig& config)
    : backbone_(std::move(backbone)), cfg_(config) {}

WrappedModel WrappedModel::wrap(Backbone backbone, const PerturbConfig& config) {
  config.validate();
  if (!backbone.has_hook("encoder.stage0") || !backbone.has_hook("decoder.penultimate"))
    throw std::invalid_argument(
        "wrap: backbone must expose encoder.stage0 and decoder.penultimate hooks");
  if (config.variant == Variant::kHrfpPlus && !backbone.spec().with_instance_norms)
    backbone.add_instance_norms();

  WrappedModel m(std::move(backbone), config);
  const auto& widths = m.backbone_.spec().stage_widths;
  m.stack_spec_.depth_encoder = config.hrfp_depth;
  m.stack_spec_.depth_decoder = config.hrfp_depth;
  m.stack_spec_.kernel_side = config.hrfp_kernel;
  m.stack_spec_.channels = widths.front();
  m.stack_spec_.o2_channels = widths.front();  // penultimate decoder width
  m.stack_spec_.schedule = make_schedule(config.hrfp_depth, config.osf);
  m.stack_spec_.bn_init_std = config.bn_init_std;

  if (config.variant == Variant::kLMrfp) {
    const RandomStack init =
        sample_stack(m.stack_spec_, derive_seed(config.master_seed, 0, kTagStack));
    const int layers = init.spec.depth_encoder + init.spec.depth_decoder;
    for (int l = 0; l < layers; ++l)
      m.stack_params_.emplace_back("stack.conv" + std::to_string(l), init.conv_weights[l]);
    for (int l = 0; l < layers; ++l)
      m.stack_params_.emplace_back("stack.gamma" + std::to_string(l), init.bn_gammas[l]);
    for (int l = 0; l < layers; ++l)
      m.stack_params_.emplace_back("stack.beta" + std::to_string(l), init.bn_betas[l]);
    m.stack_params_.emplace_back("stack.o2_adapter", init.o2_adapter);
  }
  return m;
}

RandomStack WrappedModel::current_learnable_stack() const {
  if (cfg_.variant != Variant::kLMrfp)
    throw std::logic_error("current_learnable_stack: not in learnable mode");
  RandomStack s;
  s.spec = stack_spec_;
  s.seed = derive_seed(cfg_.master_seed, 0, kTagStack);
  const int layers = stack_spec_.depth_encoder + stack_spec_.depth_decoder;
  for (int l = 0; l < layers; ++l) s.conv_weights.push_back(stack_params_[l].value);
  for (int l = 0; l < layers; ++l) s.bn_gammas.push_back(stack_params_[layers + l].value);
  for (int l = 0; l < layers; ++l)
    s.bn_betas.push_back(stack_params_[2 * layers + l].value);
  s.o2_adapter = stack_params_[3 * layers].value;
  return s;
}

IterationDraw WrappedModel::training_step_setup(std::int64_t iteration) {
  IterationDraw d;
  d.iteration = iteration;
  if (cfg_.variant == Variant::kNone) return d;

  Rng toggles(derive_seed(cfg_.master_seed, static_cast<std::uint64_t>(iteration), kTagToggle));
  d.hrfp_on = toggles.bernoulli(cfg_.p_hrfp);
  d.np_on = toggles.bernoulli(cfg_.p_np);
  d.np_seed = derive_seed(cfg_.master_seed, static_cast<std::uint64_t>(iteration), kTagNp);
  d.rgn_seed = derive_seed(cfg_.master_seed, static_cast<std::uint64_t>(iteration), kTagRgn);

  if (d.hrfp_on) {
    if (cfg_.variant == Variant::kLMrfp) {
      d.stack = std::make_shared<RandomStack>(current_learnable_stack());
    } else if (cfg_.variant != Variant::kRgn) {
      d.stack = std::make_shared<RandomStack>(sample_stack(
          stack_spec_,
          derive_seed(cfg_.master_seed, static_cast<std::uint64_t>(iteration), kTagStack)));
    }
  }
  return d;
}

Var WrappedModel::forward_train(const Var& images, const IterationDraw& draw) {
  const int batch = images.value().n();
  const int c0 = backbone_.spec().stage_widths.front();

  Var o2;  // captured by the stage-0 hook, consumed by the penultimate hook
  Backbone::HookMap hooks;
  hooks["encoder.stage0"] = [&](const Var& s0) {
    Var out = s0;
    if (draw.np_on) {
      const StyleCoeffs coeffs =
          sample_coeffs(batch, c0, cfg_.np_mean, cfg_.np_std, draw.np_seed);
      out = np_plus(out, coeffs);
    }
    if (draw.hrfp_on) {
      if (cfg_.variant == Variant::kRgn) {
        out = rgn_perturb(out, cfg_.rgn_std, draw.rgn_seed);
      } else if (cfg_.variant == Variant::kLMrfp) {
        const int layers = stack_spec_.depth_encoder + stack_spec_.depth_decoder;
        std::vector<Var> ws, gs, bs;
        for (int l = 0; l < layers; ++l) ws.push_back(Var::leaf(stack_params_[l]));
        for (int l = 0; l < layers; ++l)
          gs.push_back(Var::leaf(stack_params_[layers + l]));
        for (int l = 0; l < layers; ++l)
          bs.push_back(Var::leaf(stack_params_[2 * layers + l]));
        // the stack sees the clean tap, so the two perturbations compose
        // independently of each other's toggles
        HrfpOut h = hrfp_forward_with(s0, stack_spec_, ws, gs, bs);
        o2 = h.o2;
        out = apply_o1(out, h.o1);
      } else {
        HrfpOut h = hrfp_forward(s0, *draw.stack);
        o2 = h.o2;
        out = apply_o1(out, h.o1);
      }
    }
    return out;
  };
  hooks["decoder.penultimate"] = [&](const Var& p) {
    if (cfg_.variant == Variant::kHrfpPlus && draw.hrfp_on && o2.defined())
      return apply_o2(p, o2, *draw.stack);
    return p;
  };

  return backbone_.forward(images, true, &hooks).logits;
}

Tensor WrappedModel::forward_eval(const Tensor& images) {
  return backbone_.forward_eval(images);
}

std::vector<Parameter*> WrappedModel::trainable_parameters() {
  std::vector<Parameter*> out = backbone_.parameters();
  for (auto& p : stack_params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> WrappedModel::weight_decay_parameters() {
  return backbone_.parameters();
}

std::size_t WrappedModel::trainable_parameter_count() const {
  std::size_t total = backbone_.parameter_count();
  for (const auto& p : stack_params_) total += p.value.size();
  return total;
}

}  // namespace mrfp
