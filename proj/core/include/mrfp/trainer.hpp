#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mrfp/dataset.hpp"
#include "mrfp/metrics.hpp"
#include "mrfp/mrfp.hpp"

namespace mrfp {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
  int max_iter = 2000;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool augment = true;  // random horizontal flip + random crop

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// lr0 * (1 - iteration/max_iter)^poly_power
double poly_lr(int iteration, const TrainConfig& cfg);

struct TrainingDivergence : std::runtime_error {
  explicit TrainingDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainResult {
  std::vector<double> loss_trace;
  std::vector<double> lr_trace;
};

// Momentum SGD over parameter groups; weight decay is per group so ephemeral
// or learnable stack weights never decay.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum) : momentum_(momentum) {}

  void add_group(std::vector<Parameter*> params, double weight_decay);
  void zero_grad();
  void step(double lr);

 private:
  struct Group {
    std::vector<Parameter*> params;
    double weight_decay;
    std::vector<Tensor> velocity;
  };
  double momentum_;
  std::vector<Group> groups_;
};

struct Batch {
  Tensor images;
  LabelMap labels;
};

// Deterministic batch for one iteration: uniform sampling with replacement
// (uniformly interleaving sources in the multi-source case) plus the
// augmentations, all drawn from a stream keyed by (seed, iteration).
Batch assemble_batch(const std::vector<std::vector<Sample>>& sources,
                     const TrainConfig& cfg, std::int64_t iteration);

// Empirical risk minimization of the mean per-pixel cross-entropy with the
// per-iteration perturbation draws supplied by the wrapped model.
TrainResult train(WrappedModel& model, const std::vector<std::vector<Sample>>& sources,
                  const TrainConfig& cfg);
TrainResult train(WrappedModel& model, const std::vector<Sample>& source,
                  const TrainConfig& cfg);

LabelMap argmax_labels(const Tensor& logits);

MIoUReport evaluate(WrappedModel& model, const std::vector<Sample>& samples,
                    int batch_size = 8);
MIoUReport evaluate(const std::function<LabelMap(const Sample&)>& predict,
                    const std::vector<Sample>& samples, int num_classes);

// Mean per-sample cross-entropy over a whole dataset, evaluation path.
double dataset_loss(WrappedModel& model, const std::vector<Sample>& samples);

}  // namespace mrfp
