#include "mrfp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mrfp {

ConfusionMatrix::ConfusionMatrix(int num_classes, int ignore_label)
    : k_(num_classes), ignore_(ignore_label),
      counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: num_classes < 1");
}

void ConfusionMatrix::accumulate(const LabelMap& gt, const LabelMap& pred) {
  if (gt.n != pred.n || gt.h != pred.h || gt.w != pred.w)
    throw std::invalid_argument("ConfusionMatrix: gt/pred shape mismatch");
  for (std::size_t i = 0; i < gt.v.size(); ++i) {
    const std::int32_t g = gt.v[i];
    if (g == ignore_) continue;
    const std::int32_t p = pred.v[i];
    if (g < 0 || g >= k_ || p < 0 || p >= k_)
      throw std::out_of_range("ConfusionMatrix: label out of range");
    counts_[static_cast<std::size_t>(g) * k_ + p]++;
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw std::invalid_argument("ConfusionMatrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto c : counts_) t += c;
  return t;
}

MIoUReport miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::domain_error("miou: empty confusion matrix");
  const int k = cm.num_classes();
  MIoUReport r;
  r.per_class_iou.assign(k, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int i = 0; i < k; ++i) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    const std::int64_t denom = row + col - cm.at(i, i);
    if (denom == 0) continue;  // class absent from both gt and prediction
    r.per_class_iou[i] = static_cast<double>(cm.at(i, i)) / static_cast<double>(denom);
    sum += r.per_class_iou[i];
    present++;
  }
  r.mean_iou = present > 0 ? sum / present : 0.0;
  return r;
}

StatEmbedding stat_embedding(const Tensor& features, double eps) {
  const ChannelStats s = channel_stats(features, eps);
  const int n = static_cast<int>(s.mu.rows());
  const int c = static_cast<int>(s.mu.cols());
  StatEmbedding e(n, 2 * c);
  e.leftCols(c) = s.mu;
  e.rightCols(c) = s.sigma;
  return e;
}

double mmd(const StatEmbedding& a, const StatEmbedding& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("mmd: dimension mismatch");
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.rows());
  if (n < 2 || m < 2) throw std::invalid_argument("mmd: need at least 2 samples per set");

  Eigen::MatrixXd pooled(n + m, a.cols());
  pooled.topRows(n) = a;
  pooled.bottomRows(m) = b;

  // median heuristic over all pooled pairs
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n + m) * (n + m - 1) / 2);
  for (int i = 0; i < n + m; ++i)
    for (int j = i + 1; j < n + m; ++j)
      dists.push_back((pooled.row(i) - pooled.row(j)).norm());
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double h = dists[mid];
  if (!(h > 0.0)) h = 1.0;  // degenerate cloud; any bandwidth gives mmd 0
  const double gamma = 1.0 / (2.0 * h * h);

  auto kernel_mean = [gamma](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    double s = 0.0;
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < y.rows(); ++j)
        s += std::exp(-gamma * (x.row(i) - y.row(j)).squaredNorm());
    return s / (static_cast<double>(x.rows()) * y.rows());
  };

  const double v = kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b);
  return v > 0.0 ? v : 0.0;
}

void export_embedding(const StatEmbedding& e, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("export_embedding: cannot open " + path);
  os << "# stat-embedding rows=" << e.rows() << " cols=" << e.cols() << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", e(i, j));
      os << buf << (j + 1 < e.cols() ? ' ' : '\n');
    }
  }
  if (!os) throw std::runtime_error("export_embedding: write failed for " + path);
}

StatEmbedding import_embedding(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("import_embedding: cannot open " + path);
  std::string header;
  std::getline(is, header);
  Eigen::Index rows = 0, cols = 0;
  if (std::sscanf(header.c_str(), "# stat-embedding rows=%ld cols=%ld", &rows, &cols) != 2)
    throw std::runtime_error("import_embedding: bad header in " + path);
  StatEmbedding e(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(is >> e(i, j)))
        throw std::runtime_error("import_embedding: truncated " + path);
  return e;
}

}  // namespace mrfp
