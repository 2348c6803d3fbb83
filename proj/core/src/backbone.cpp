#include "mrfp/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mrfp/rng.hpp"

namespace mrfp {

void BackboneSpec::validate() const {
  if (stage_widths.empty()) throw std::invalid_argument("BackboneSpec: no stages");
  for (int w : stage_widths)
    if (w < 1) throw std::invalid_argument("BackboneSpec: stage width < 1");
  if (in_channels < 1 || num_classes < 1)
    throw std::invalid_argument("BackboneSpec: channels/classes must be >= 1");
  if (kernel_side < 1 || kernel_side % 2 == 0)
    throw std::invalid_argument("BackboneSpec: kernel_side must be odd");
}

Backbone::Backbone(const BackboneSpec& spec, std::uint64_t seed)
    : spec_(spec), seed_(seed) {
  spec_.validate();
  Rng rng(seed);
  const int k = spec_.kernel_side;

  auto add_conv = [&](const std::string& name, int cin, int cout, int ks) {
    Tensor w(cout, cin, ks, ks);
    const double he = std::sqrt(2.0 / (static_cast<double>(cin) * ks * ks));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.gaussian(0.0, he);
    params_.emplace_back(name + ".weight", std::move(w));
    params_.emplace_back(name + ".bias", Tensor(1, cout, 1, 1));
    return ConvIdx{static_cast<int>(params_.size()) - 2,
                   static_cast<int>(params_.size()) - 1};
  };

  int cin = spec_.in_channels;
  for (std::size_t i = 0; i < spec_.stage_widths.size(); ++i) {
    enc_.push_back(add_conv("encoder.stage" + std::to_string(i), cin,
                            spec_.stage_widths[i], k));
    cin = spec_.stage_widths[i];
  }
  for (std::size_t i = spec_.stage_widths.size() - 1; i >= 1; --i) {
    dec_.push_back(add_conv("decoder.block" + std::to_string(spec_.stage_widths.size() - 1 - i),
                            spec_.stage_widths[i], spec_.stage_widths[i - 1], k));
  }
  head_ = add_conv("head", spec_.stage_widths.front(), spec_.num_classes, 1);

  if (spec_.with_instance_norms) {
    spec_.with_instance_norms = false;  // add_instance_norms re-arms it
    add_instance_norms();
  }
}

void Backbone::add_instance_norms() {
  if (spec_.with_instance_norms) return;
  const int count = std::min<int>(3, static_cast<int>(spec_.stage_widths.size()));
  for (int i = 0; i < count; ++i) {
    const int c = spec_.stage_widths[i];
    params_.emplace_back("encoder.in" + std::to_string(i) + ".gamma",
                         Tensor::full(1, c, 1, 1, 1.0));
    params_.emplace_back("encoder.in" + std::to_string(i) + ".beta", Tensor(1, c, 1, 1));
    in_affine_.push_back(ConvIdx{static_cast<int>(params_.size()) - 2,
                                 static_cast<int>(params_.size()) - 1});
  }
  spec_.with_instance_norms = true;
}

bool Backbone::has_hook(const std::string& name) const {
  return std::find(spec_.hooks.begin(), spec_.hooks.end(), name) != spec_.hooks.end();
}

Var Backbone::maybe_hook(const std::string& name, Var v, Forward& fwd,
                         const HookMap* hooks) {
  if (!has_hook(name)) return v;
  fwd.taps.emplace(name, v);
  if (hooks) {
    const auto it = hooks->find(name);
    if (it != hooks->end() && it->second) return it->second(v);
  }
  return v;
}

Backbone::Forward Backbone::forward(const Var& images, bool trainable,
                                    const HookMap* hooks) {
  const Tensor& xv = images.value();
  if (xv.c() != spec_.in_channels)
    throw std::invalid_argument("Backbone: input channel mismatch");

  auto bind = [&](int idx) -> Var {
    return trainable ? Var::leaf(params_[idx]) : Var::constant(params_[idx].value);
  };

  Forward fwd;
  const int pad = spec_.kernel_side / 2;
  Var cur = images;
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    cur = conv2d(cur, bind(enc_[i].w), bind(enc_[i].b), 2, pad);
    cur = relu(cur);
    // instance norms sit on the stage outputs, so normalized activations are
    // what the hooks (and the rest of the encoder) see
    if (i < in_affine_.size())
      cur = instance_norm(cur, bind(in_affine_[i].w), bind(in_affine_[i].b),
                          spec_.norm_eps);
    if (i == 0) cur = maybe_hook("encoder.stage0", cur, fwd, hooks);
  }
  fwd.taps.emplace("encoder.final", cur);

  for (std::size_t i = 0; i < dec_.size(); ++i) {
    const Tensor& v = cur.value();
    cur = bilinear_resize(cur, v.h() * 2, v.w() * 2);
    cur = conv2d(cur, bind(dec_[i].w), bind(dec_[i].b), 1, pad);
    cur = relu(cur);
  }
  cur = maybe_hook("decoder.penultimate", cur, fwd, hooks);

  Var logits = conv2d(cur, bind(head_.w), bind(head_.b), 1, 0);
  logits = bilinear_resize(logits, xv.h(), xv.w());
  fwd.logits = logits;
  return fwd;
}

Tensor Backbone::forward_eval(const Tensor& images) {
  return forward(Var::constant(images), false, nullptr).logits.value();
}

std::vector<Parameter*> Backbone::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t Backbone::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

}  // namespace mrfp
