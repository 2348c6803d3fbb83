#include <benchmark/benchmark.h>

#include "mrfp/autodiff.hpp"
#include "mrfp/dataset.hpp"
#include "mrfp/metrics.hpp"
#include "mrfp/mrfp.hpp"
#include "mrfp/npplus.hpp"
#include "mrfp/rng.hpp"
#include "mrfp/spectral.hpp"
#include "mrfp/trainer.hpp"

namespace {

mrfp::Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  mrfp::Tensor t(n, c, h, w);
  mrfp::Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian();
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const mrfp::Tensor x = random_tensor(8, 16, side, side, 1);
  const mrfp::Tensor w = random_tensor(16, 16, 3, 3, 2);
  for (auto _ : state) {
    auto y = mrfp::conv2d(mrfp::Var::constant(x), mrfp::Var::constant(w), {}, 1, 1);
    benchmark::DoNotOptimize(y.value().data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

void BM_Conv2dTrainStep(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const mrfp::Tensor x = random_tensor(8, 16, side, side, 1);
  mrfp::Parameter w("w", random_tensor(16, 16, 3, 3, 2));
  for (auto _ : state) {
    auto y = mrfp::conv2d(mrfp::Var::input(x), mrfp::Var::leaf(w), {}, 1, 1);
    auto loss = mrfp::mean_all(mrfp::mul(y, y));
    mrfp::backward(loss);
    benchmark::DoNotOptimize(w.grad.data());
    w.zero_grad();
  }
}
BENCHMARK(BM_Conv2dTrainStep)->Arg(32);

void BM_HrfpSample(benchmark::State& state) {
  mrfp::StackSpec spec;
  spec.channels = 16;
  spec.schedule = mrfp::make_schedule(4, 2.0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto stack = mrfp::sample_stack(spec, seed++);
    benchmark::DoNotOptimize(stack.conv_weights.front().data());
  }
}
BENCHMARK(BM_HrfpSample);

void BM_HrfpForward(benchmark::State& state) {
  mrfp::StackSpec spec;
  spec.channels = 16;
  spec.schedule = mrfp::make_schedule(4, 2.0);
  const auto stack = mrfp::sample_stack(spec, 7);
  const mrfp::Tensor x = random_tensor(8, 16, 32, 32, 1);
  for (auto _ : state) {
    auto out = mrfp::hrfp_forward(mrfp::Var::constant(x), stack);
    benchmark::DoNotOptimize(out.o1.value().data());
  }
}
BENCHMARK(BM_HrfpForward);

void BM_NpPlus(benchmark::State& state) {
  const mrfp::Tensor x = random_tensor(8, 16, 32, 32, 1);
  const auto coeffs = mrfp::sample_coeffs(8, 16, 1.0, 0.75, 3);
  for (auto _ : state) {
    auto y = mrfp::np_plus(x, coeffs, mrfp::channel_stats(x));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_NpPlus);

void BM_BandEnergy(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const mrfp::Tensor x = random_tensor(1, 8, side, side, 5);
  for (auto _ : state) {
    auto r = mrfp::band_energy(x);
    benchmark::DoNotOptimize(r.energies.data());
  }
}
BENCHMARK(BM_BandEnergy)->Arg(32)->Arg(64);

void BM_Mmd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mrfp::Rng rng(11);
  mrfp::StatEmbedding a(n, 32), b(n, 32);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 32; ++j) {
      a(i, j) = rng.gaussian();
      b(i, j) = rng.gaussian() + 1.0;
    }
  for (auto _ : state) {
    benchmark::DoNotOptimize(mrfp::mmd(a, b));
  }
}
BENCHMARK(BM_Mmd)->Arg(64)->Arg(256);

void BM_GenerateDataset(benchmark::State& state) {
  mrfp::DomainSpec spec;
  std::int64_t offset = 0;
  for (auto _ : state) {
    auto samples = mrfp::generate_dataset(spec, 8, 64, 64, offset);
    offset += 8;
    benchmark::DoNotOptimize(samples.front().image.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_GenerateDataset);

void BM_TrainIteration(benchmark::State& state) {
  mrfp::BackboneSpec bspec;
  mrfp::PerturbConfig pcfg;
  pcfg.variant = mrfp::Variant::kHrfpPlus;
  auto model = mrfp::WrappedModel::wrap(mrfp::Backbone(bspec, 1), pcfg);
  mrfp::TrainConfig tcfg;
  tcfg.max_iter = 1;
  const auto data = mrfp::generate_dataset(mrfp::DomainSpec{}, 16, 64, 64);
  std::int64_t it = 0;
  mrfp::SgdOptimizer opt(tcfg.momentum);
  opt.add_group(model.weight_decay_parameters(), tcfg.weight_decay);
  for (auto _ : state) {
    auto draw = model.training_step_setup(it);
    auto batch = mrfp::assemble_batch({data}, tcfg, it);
    auto logits = model.forward_train(mrfp::Var::constant(batch.images), draw);
    auto loss = mrfp::softmax_cross_entropy(logits, batch.labels, mrfp::kIgnoreLabel);
    opt.zero_grad();
    mrfp::backward(loss);
    opt.step(0.01);
    ++it;
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_TrainIteration);

}  // namespace

BENCHMARK_MAIN();
