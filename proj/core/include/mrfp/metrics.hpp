#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "mrfp/npplus.hpp"
#include "mrfp/tensor.hpp"

namespace mrfp {

// Confusion counts, rows = ground truth, cols = prediction. Pixels labeled
// with the ignore value never enter the counts.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, int ignore_label = kIgnoreLabel);

  void accumulate(const LabelMap& gt, const LabelMap& pred);
  void merge(const ConfusionMatrix& other);

  std::int64_t at(int gt, int pred) const { return counts_[gt * k_ + pred]; }
  std::int64_t& at(int gt, int pred) { return counts_[gt * k_ + pred]; }
  int num_classes() const { return k_; }
  int ignore_label() const { return ignore_; }
  std::int64_t total() const;

 private:
  int k_;
  int ignore_;
  std::vector<std::int64_t> counts_;
};

// Per-class IoU is NaN for classes absent from both prediction and ground
// truth; those classes are excluded from the mean.
struct MIoUReport {
  std::vector<double> per_class_iou;
  double mean_iou = 0.0;
};

MIoUReport miou(const ConfusionMatrix& cm);

// One row per sample: [mu_0..mu_{C-1}, sigma_0..sigma_{C-1}] of the given
// feature maps' channel statistics.
using StatEmbedding = Eigen::MatrixXd;

StatEmbedding stat_embedding(const Tensor& features, double eps = kStatsEps);

// Squared maximum mean discrepancy, biased V-statistic, RBF kernel with the
// median-of-pooled-pairwise-distances bandwidth.
double mmd(const StatEmbedding& a, const StatEmbedding& b);

// Plain-text matrix with a one-line header; values round-trip at 17
// significant digits.
void export_embedding(const StatEmbedding& e, const std::string& path);
StatEmbedding import_embedding(const std::string& path);

}  // namespace mrfp
