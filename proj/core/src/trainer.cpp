#include "mrfp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mrfp/rng.hpp"

namespace mrfp {

namespace {
constexpr std::uint64_t kTagBatch = 0x626174;
constexpr int kCropPad = 4;
}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0) || !(poly_power > 0.0))
    throw std::invalid_argument("TrainConfig: non-positive optimizer setting");
  if (max_iter < 1 || batch_size < 1)
    throw std::invalid_argument("TrainConfig: max_iter/batch_size must be >= 1");
}

double poly_lr(int iteration, const TrainConfig& cfg) {
  if (iteration < 0 || iteration > cfg.max_iter)
    throw std::out_of_range("poly_lr: iteration outside [0, max_iter]");
  return cfg.lr0 *
         std::pow(1.0 - static_cast<double>(iteration) / cfg.max_iter, cfg.poly_power);
}

void SgdOptimizer::add_group(std::vector<Parameter*> params, double weight_decay) {
  Group g;
  g.params = std::move(params);
  g.weight_decay = weight_decay;
  g.velocity.reserve(g.params.size());
  for (const Parameter* p : g.params)
    g.velocity.emplace_back(p->value.n(), p->value.c(), p->value.h(), p->value.w());
  groups_.push_back(std::move(g));
}

void SgdOptimizer::zero_grad() {
  for (auto& g : groups_)
    for (Parameter* p : g.params) p->zero_grad();
}

void SgdOptimizer::step(double lr) {
  for (auto& g : groups_)
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      Parameter& p = *g.params[i];
      Tensor& v = g.velocity[i];
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double grad = p.grad[j] + g.weight_decay * p.value[j];
        v[j] = momentum_ * v[j] + grad;
        p.value[j] -= lr * v[j];
      }
    }
}

namespace {

// mirror index into [0, n)
int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

void place_sample(const Sample& s, bool flip, int dy, int dx, bool augment, int slot,
                  Batch& batch) {
  const int h = s.mask.h, w = s.mask.w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int sy = y, sx = x;
      if (augment) {
        sy = reflect(y + dy - kCropPad, h);
        sx = reflect(x + dx - kCropPad, w);
      }
      if (flip) sx = w - 1 - sx;
      for (int c = 0; c < 3; ++c)
        batch.images.at(slot, c, y, x) = s.image.at(0, c, sy, sx);
      batch.labels.at(slot, y, x) = s.mask.at(0, sy, sx);
    }
}

}  // namespace

Batch assemble_batch(const std::vector<std::vector<Sample>>& sources,
                     const TrainConfig& cfg, std::int64_t iteration) {
  if (sources.empty() || sources.front().empty())
    throw std::invalid_argument("assemble_batch: empty source set");
  const int h = sources.front().front().mask.h;
  const int w = sources.front().front().mask.w;

  Batch b;
  b.images = Tensor(cfg.batch_size, 3, h, w);
  b.labels = LabelMap(cfg.batch_size, h, w);

  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(iteration), kTagBatch));
  for (int slot = 0; slot < cfg.batch_size; ++slot) {
    const auto src = sources.size() > 1
                         ? static_cast<std::size_t>(rng.uniform_int(0, sources.size() - 1))
                         : 0;
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, sources[src].size() - 1));
    bool flip = false;
    int dy = 0, dx = 0;
    if (cfg.augment) {
      flip = rng.bernoulli(0.5);
      dy = static_cast<int>(rng.uniform_int(0, 2 * kCropPad));
      dx = static_cast<int>(rng.uniform_int(0, 2 * kCropPad));
    }
    place_sample(sources[src][idx], flip, dy, dx, cfg.augment, slot, b);
  }
  return b;
}

TrainResult train(WrappedModel& model, const std::vector<std::vector<Sample>>& sources,
                  const TrainConfig& cfg) {
  cfg.validate();
  TrainResult result;
  result.loss_trace.reserve(cfg.max_iter);
  result.lr_trace.reserve(cfg.max_iter);

  SgdOptimizer opt(cfg.momentum);
  opt.add_group(model.weight_decay_parameters(), cfg.weight_decay);
  if (model.config().variant == Variant::kLMrfp) {
    // learnable stack weights train but never decay
    std::vector<Parameter*> stack_only;
    const auto decayable = model.weight_decay_parameters();
    for (Parameter* p : model.trainable_parameters()) {
      if (std::find(decayable.begin(), decayable.end(), p) == decayable.end())
        stack_only.push_back(p);
    }
    opt.add_group(std::move(stack_only), 0.0);
  }

  for (int it = 0; it < cfg.max_iter; ++it) {
    const double lr = poly_lr(it, cfg);
    const IterationDraw draw = model.training_step_setup(it);
    const Batch batch = assemble_batch(sources, cfg, it);

    Var logits = model.forward_train(Var::constant(batch.images), draw);
    Var loss = softmax_cross_entropy(logits, batch.labels, kIgnoreLabel);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value))
      throw TrainingDivergence("loss became non-finite at iteration " + std::to_string(it));

    opt.zero_grad();
    backward(loss);
    opt.step(lr);

    result.loss_trace.push_back(loss_value);
    result.lr_trace.push_back(lr);
  }
  return result;
}

TrainResult train(WrappedModel& model, const std::vector<Sample>& source,
                  const TrainConfig& cfg) {
  return train(model, std::vector<std::vector<Sample>>{source}, cfg);
}

LabelMap argmax_labels(const Tensor& logits) {
  LabelMap out(logits.n(), logits.h(), logits.w());
  const std::size_t plane = static_cast<std::size_t>(logits.h()) * logits.w();
  for (int n = 0; n < logits.n(); ++n)
    for (int y = 0; y < logits.h(); ++y)
      for (int x = 0; x < logits.w(); ++x) {
        const std::size_t base = logits.index(n, 0, y, x);
        int best = 0;
        double bv = logits[base];
        for (int c = 1; c < logits.c(); ++c) {
          const double v = logits[base + c * plane];
          if (v > bv) {
            bv = v;
            best = c;
          }
        }
        out.at(n, y, x) = best;
      }
  return out;
}

namespace {

Tensor stack_images(const std::vector<Sample>& samples, std::size_t begin, std::size_t end) {
  const int h = samples[begin].mask.h, w = samples[begin].mask.w;
  Tensor images(static_cast<int>(end - begin), 3, h, w);
  for (std::size_t i = begin; i < end; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          images.at(static_cast<int>(i - begin), c, y, x) = samples[i].image.at(0, c, y, x);
  return images;
}

}  // namespace

MIoUReport evaluate(WrappedModel& model, const std::vector<Sample>& samples,
                    int batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
  const int k = model.backbone().spec().num_classes;
  ConfusionMatrix cm(k);
  for (std::size_t begin = 0; begin < samples.size();) {
    const std::size_t end = std::min(samples.size(), begin + batch_size);
    const Tensor logits = model.forward_eval(stack_images(samples, begin, end));
    const LabelMap pred = argmax_labels(logits);
    for (std::size_t i = begin; i < end; ++i) {
      LabelMap p1(1, pred.h, pred.w);
      for (int y = 0; y < pred.h; ++y)
        for (int x = 0; x < pred.w; ++x)
          p1.at(0, y, x) = pred.at(static_cast<int>(i - begin), y, x);
      cm.accumulate(samples[i].mask, p1);
    }
    begin = end;
  }
  return miou(cm);
}

MIoUReport evaluate(const std::function<LabelMap(const Sample&)>& predict,
                    const std::vector<Sample>& samples, int num_classes) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
  ConfusionMatrix cm(num_classes);
  for (const Sample& s : samples) cm.accumulate(s.mask, predict(s));
  return miou(cm);
}

double dataset_loss(WrappedModel& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("dataset_loss: empty sample set");
  double total = 0.0;
  for (const Sample& s : samples) {
    const Tensor logits = model.forward_eval(s.image);
    const int k = logits.c();
    const std::size_t plane = static_cast<std::size_t>(logits.h()) * logits.w();
    double loss = 0.0;
    std::int64_t valid = 0;
    for (int y = 0; y < logits.h(); ++y)
      for (int x = 0; x < logits.w(); ++x) {
        const std::int32_t lab = s.mask.at(0, y, x);
        if (lab == kIgnoreLabel) continue;
        if (lab < 0 || lab >= k) throw std::out_of_range("dataset_loss: label out of range");
        const std::size_t base = logits.index(0, 0, y, x);
        double zmax = logits[base];
        for (int c = 1; c < k; ++c) zmax = std::max(zmax, logits[base + c * plane]);
        double se = 0.0;
        for (int c = 0; c < k; ++c) se += std::exp(logits[base + c * plane] - zmax);
        loss += std::log(se) + zmax - logits[base + lab * plane];
        valid++;
      }
    if (valid > 0) total += loss / static_cast<double>(valid);
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace mrfp
