#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mrfp {

// Dense rank-4 activation tensor (batch, channel, height, width), row-major
// doubles. The universal currency between modules.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w),
        data_(checked_size(n, c, h, w), 0.0) {}

  static Tensor full(int n, int c, int h, int w, double v) {
    Tensor t(n, c, h, w);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::array<int, 4> shape() const { return {n_, c_, h_, w_}; }
  bool same_shape(const Tensor& o) const { return shape() == o.shape(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }
  double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && a.data_ == b.data_;
  }

 private:
  static std::size_t checked_size(int n, int c, int h, int w) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor: negative dimension");
    return static_cast<std::size_t>(n) * c * h * w;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

// Integer label image batch (batch, height, width). 255 is the conventional
// ignore value for segmentation masks.
struct LabelMap {
  int n = 0, h = 0, w = 0;
  std::vector<std::int32_t> v;

  LabelMap() = default;
  LabelMap(int n_, int h_, int w_)
      : n(n_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * h_ * w_, 0) {}

  std::int32_t& at(int b, int y, int x) {
    return v[(static_cast<std::size_t>(b) * h + y) * w + x];
  }
  std::int32_t at(int b, int y, int x) const {
    return v[(static_cast<std::size_t>(b) * h + y) * w + x];
  }
  std::size_t size() const { return v.size(); }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.n == b.n && a.h == b.h && a.w == b.w && a.v == b.v;
  }
};

inline constexpr int kIgnoreLabel = 255;

}  // namespace mrfp
