#include "mrfp/hrfp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mrfp/rng.hpp"

namespace mrfp {

namespace {
constexpr double kBnEps = 1e-5;
constexpr char kMagic[8] = {'M', 'R', 'F', 'P', 'S', 'T', 'K', '1'};
}  // namespace

void StackSpec::validate() const {
  if (depth_encoder < 1 || depth_decoder != depth_encoder)
    throw std::invalid_argument("StackSpec: encoder/decoder depths must match and be >= 1");
  if (kernel_side < 1 || kernel_side % 2 == 0)
    throw std::invalid_argument("StackSpec: kernel_side must be a positive odd integer");
  if (channels < 1) throw std::invalid_argument("StackSpec: channels must be >= 1");
  if (schedule.depth() != depth_encoder)
    throw std::invalid_argument("StackSpec: schedule depth must equal encoder depth");
  if (!(bn_init_std >= 0.0)) throw std::invalid_argument("StackSpec: bn_init_std must be >= 0");
}

std::size_t RandomStack::parameter_count() const {
  std::size_t total = o2_adapter.size();
  for (const auto& t : conv_weights) total += t.size();
  for (const auto& t : bn_gammas) total += t.size();
  for (const auto& t : bn_betas) total += t.size();
  return total;
}

RandomStack sample_stack(const StackSpec& spec, std::uint64_t seed) {
  spec.validate();
  RandomStack s;
  s.spec = spec;
  if (s.spec.o2_channels == 0) s.spec.o2_channels = spec.channels;
  s.seed = seed;
  Rng rng(seed);

  const int layers = spec.depth_encoder + spec.depth_decoder;
  const int c = spec.channels;
  const int k = spec.kernel_side;
  const double he_std = std::sqrt(2.0 / (static_cast<double>(c) * k * k));
  s.conv_weights.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    Tensor w(c, c, k, k);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.gaussian(0.0, he_std);
    s.conv_weights.push_back(std::move(w));
  }
  s.bn_gammas.reserve(layers);
  s.bn_betas.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    // gamma spreads around the standard unit init; beta around zero
    Tensor g(1, c, 1, 1);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.gaussian(1.0, spec.bn_init_std);
    s.bn_gammas.push_back(std::move(g));
  }
  for (int l = 0; l < layers; ++l) {
    Tensor b(1, c, 1, 1);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.gaussian(0.0, spec.bn_init_std);
    s.bn_betas.push_back(std::move(b));
  }
  // damped init: the decoder-side branch lands just under the penultimate
  // layer's own activation scale rather than swamping it
  const double adapter_std = 0.35 * std::sqrt(1.0 / static_cast<double>(c));
  Tensor a(s.spec.o2_channels, c, 1, 1);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.gaussian(0.0, adapter_std);
  s.o2_adapter = std::move(a);
  return s;
}

namespace {

Var stack_norm(const Var& x, const Var& gamma, const Var& beta, bool bypass) {
  if (bypass) return add(mul(x, gamma), beta);
  return batch_norm(x, gamma, beta, kBnEps);
}

}  // namespace

HrfpOut hrfp_forward_with(const Var& x, const StackSpec& spec,
                          const std::vector<Var>& conv_weights,
                          const std::vector<Var>& gammas, const std::vector<Var>& betas) {
  spec.validate();
  const int layers = spec.depth_encoder + spec.depth_decoder;
  if (static_cast<int>(conv_weights.size()) != layers ||
      static_cast<int>(gammas.size()) != layers ||
      static_cast<int>(betas.size()) != layers)
    throw std::invalid_argument("hrfp_forward: weight count mismatch");
  const Tensor& xv = x.value();
  if (xv.c() != spec.channels)
    throw std::invalid_argument("hrfp_forward: input channel count != spec.channels");
  if (xv.h() < spec.kernel_side || xv.w() < spec.kernel_side)
    throw std::invalid_argument("hrfp_forward: input smaller than kernel");

  const int in_h = xv.h(), in_w = xv.w();
  const int pad = spec.kernel_side / 2;

  // encoder target sizes are anchored to the input so rounding never drifts
  std::vector<int> enc_h(spec.depth_encoder), enc_w(spec.depth_encoder);
  for (int l = 0; l < spec.depth_encoder; ++l) {
    enc_h[l] = scaled_size(spec.schedule.cumulative_scales[l], in_h);
    enc_w[l] = scaled_size(spec.schedule.cumulative_scales[l], in_w);
  }

  Var cur = x;
  for (int l = 0; l < spec.depth_encoder; ++l) {
    cur = bilinear_resize(cur, enc_h[l], enc_w[l]);
    cur = conv2d(cur, conv_weights[l], Var(), 1, pad);
    if (spec.interlayer_relu) cur = relu(cur);
    cur = stack_norm(cur, gammas[l], betas[l], spec.bn_stats_bypass);
  }
  Var o2 = cur;

  for (int l = 0; l < spec.depth_decoder; ++l) {
    const int mirror = spec.depth_encoder - 2 - l;
    const int th = mirror >= 0 ? enc_h[mirror] : in_h;
    const int tw = mirror >= 0 ? enc_w[mirror] : in_w;
    cur = bilinear_resize(cur, l == spec.depth_decoder - 1 ? in_h : th,
                          l == spec.depth_decoder - 1 ? in_w : tw);
    const int wi = spec.depth_encoder + l;
    cur = conv2d(cur, conv_weights[wi], Var(), 1, pad);
    if (spec.interlayer_relu) cur = relu(cur);
    cur = stack_norm(cur, gammas[wi], betas[wi], spec.bn_stats_bypass);
  }
  return {cur, o2};
}

HrfpOut hrfp_forward(const Var& x, const RandomStack& stack) {
  const int layers = stack.spec.depth_encoder + stack.spec.depth_decoder;
  std::vector<Var> ws, gs, bs;
  ws.reserve(layers);
  gs.reserve(layers);
  bs.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    ws.push_back(Var::constant(stack.conv_weights[l]));
    gs.push_back(Var::constant(stack.bn_gammas[l]));
    bs.push_back(Var::constant(stack.bn_betas[l]));
  }
  return hrfp_forward_with(x, stack.spec, ws, gs, bs);
}

Var apply_o1(const Var& stage0_out, const Var& o1) {
  if (!stage0_out.value().same_shape(o1.value()))
    throw std::invalid_argument("apply_o1: shape mismatch");
  return add(stage0_out, o1);
}

Var apply_o2(const Var& decoder_penult, const Var& o2, const Var& adapter) {
  const Tensor& p = decoder_penult.value();
  Var r = bilinear_resize(o2, p.h(), p.w());
  r = conv2d(r, adapter, Var(), 1, 0);
  return add(decoder_penult, r);
}

Var apply_o2(const Var& decoder_penult, const Var& o2, const RandomStack& stack) {
  return apply_o2(decoder_penult, o2, Var::constant(stack.o2_adapter));
}

namespace {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void put_tensor(std::ostream& os, const Tensor& t) {
  put<std::int32_t>(os, t.n());
  put<std::int32_t>(os, t.c());
  put<std::int32_t>(os, t.h());
  put<std::int32_t>(os, t.w());
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor get_tensor(std::istream& is) {
  const int n = get<std::int32_t>(is);
  const int c = get<std::int32_t>(is);
  const int h = get<std::int32_t>(is);
  const int w = get<std::int32_t>(is);
  Tensor t(n, c, h, w);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  return t;
}

}  // namespace

void save_stack(const RandomStack& stack, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_stack: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, 1);
  put<std::int32_t>(os, stack.spec.depth_encoder);
  put<std::int32_t>(os, stack.spec.depth_decoder);
  put<std::int32_t>(os, stack.spec.kernel_side);
  put<std::int32_t>(os, stack.spec.channels);
  put<std::int32_t>(os, stack.spec.o2_channels);
  put<double>(os, stack.spec.bn_init_std);
  put<std::uint8_t>(os, stack.spec.interlayer_relu ? 1 : 0);
  put<std::uint8_t>(os, stack.spec.bn_stats_bypass ? 1 : 0);
  put<double>(os, stack.spec.schedule.per_layer_factor);
  put<double>(os, stack.spec.schedule.overall_scale_factor);
  put<std::int32_t>(os, stack.spec.schedule.depth());
  for (double s : stack.spec.schedule.cumulative_scales) put<double>(os, s);
  put<std::uint64_t>(os, stack.seed);
  put<std::int32_t>(os, static_cast<std::int32_t>(stack.conv_weights.size()));
  for (const auto& t : stack.conv_weights) put_tensor(os, t);
  for (const auto& t : stack.bn_gammas) put_tensor(os, t);
  for (const auto& t : stack.bn_betas) put_tensor(os, t);
  put_tensor(os, stack.o2_adapter);
  if (!os) throw std::runtime_error("save_stack: write failed for " + path);
}

RandomStack load_stack(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_stack: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_stack: bad magic in " + path);
  if (get<std::uint32_t>(is) != 1) throw std::runtime_error("load_stack: unknown version");
  RandomStack s;
  s.spec.depth_encoder = get<std::int32_t>(is);
  s.spec.depth_decoder = get<std::int32_t>(is);
  s.spec.kernel_side = get<std::int32_t>(is);
  s.spec.channels = get<std::int32_t>(is);
  s.spec.o2_channels = get<std::int32_t>(is);
  s.spec.bn_init_std = get<double>(is);
  s.spec.interlayer_relu = get<std::uint8_t>(is) != 0;
  s.spec.bn_stats_bypass = get<std::uint8_t>(is) != 0;
  s.spec.schedule.per_layer_factor = get<double>(is);
  s.spec.schedule.overall_scale_factor = get<double>(is);
  const int depth = get<std::int32_t>(is);
  s.spec.schedule.cumulative_scales.resize(depth);
  for (int i = 0; i < depth; ++i) s.spec.schedule.cumulative_scales[i] = get<double>(is);
  s.seed = get<std::uint64_t>(is);
  const int layers = get<std::int32_t>(is);
  s.conv_weights.reserve(layers);
  for (int i = 0; i < layers; ++i) s.conv_weights.push_back(get_tensor(is));
  for (int i = 0; i < layers; ++i) s.bn_gammas.push_back(get_tensor(is));
  for (int i = 0; i < layers; ++i) s.bn_betas.push_back(get_tensor(is));
  s.o2_adapter = get_tensor(is);
  if (!is) throw std::runtime_error("load_stack: truncated file " + path);
  return s;
}

}  // namespace mrfp
