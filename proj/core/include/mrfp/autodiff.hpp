#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mrfp/tensor.hpp"

namespace mrfp {

// A named trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)),
        grad(value.n(), value.c(), value.h(), value.w()) {}

  void zero_grad() { grad.fill(0.0); }
};

class Node;

// Handle into a reverse-mode computation graph over rank-4 tensors. Graphs
// are rebuilt on every forward pass; backward() walks the tape once and
// accumulates leaf gradients into their bound Parameters. Ops on operands
// that do not require gradients skip all tape bookkeeping, so the same
// forward code doubles as a fast inference path when fed constants.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);  // no gradient flows through
  static Var input(Tensor value);     // differentiable; grad kept on the node
  static Var leaf(Parameter& p);      // differentiable; grad lands in p.grad

  bool defined() const { return node_ != nullptr; }
  bool requires_grad() const;
  const Tensor& value() const;
  const Tensor& grad() const;  // valid after backward()
  std::array<int, 4> shape() const { return value().shape(); }

  // internal
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Elementwise with numpy-style broadcasting (each axis equal or 1).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var affine(const Var& x, double scale, double shift);  // scale*x + shift
Var vsqrt(const Var& x);
Var relu(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// Reductions keep rank 4; reduced axes become length 1.
struct Axes {
  bool n = false, c = false, h = false, w = false;
};
Var reduce_sum(const Var& x, Axes axes);
Var reduce_mean(const Var& x, Axes axes);
Var reduce_max(const Var& x, Axes axes);
Var sum_all(const Var& x);
Var mean_all(const Var& x);

// 2-D convolution, zero padding. x (N,Ci,H,W), weight (Co,Ci,kh,kw),
// bias (1,Co,1,1) or an undefined Var for none.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

// Bilinear interpolation with half-pixel centers; returns x unchanged when
// the size already matches.
Var bilinear_resize(const Var& x, int out_h, int out_w);

// Normalization with current-tensor statistics, composed from the primitives
// above so gradients flow through the statistics. gamma/beta are (1,C,1,1).
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps);
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps);

// Mean cross-entropy: per sample the mean over non-ignored pixels, then the
// mean over the batch. logits (B,K,H,W), labels (B,H,W).
Var softmax_cross_entropy(const Var& logits, const LabelMap& labels, int ignore_label);

// Reverse pass from a scalar root. May be called once per graph.
void backward(const Var& scalar_root);

}  // namespace mrfp
