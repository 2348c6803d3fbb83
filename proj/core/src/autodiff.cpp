#include "mrfp/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace mrfp {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

class Node {
 public:
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  Parameter* param = nullptr;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads the argument (this node's gradient) and accumulates into parents.
  std::function<void(const Tensor&)> backfn;
};

using NodeRef = std::shared_ptr<Node>;

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(n);
}

Var Var::input(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(n);
}

Var Var::leaf(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->requires_grad = true;
  n->param = &p;
  return Var(n);
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("Var: undefined");
  return node_->value;
}

const Tensor& Var::grad() const {
  if (!node_) throw std::logic_error("Var: undefined");
  return node_->grad;
}

namespace {

void ensure_grad(Node& n) {
  if (n.grad.empty() && !n.value.empty()) {
    const auto s = n.value.shape();
    n.grad = Tensor(s[0], s[1], s[2], s[3]);
  }
}

Var make_node(Tensor value, std::vector<NodeRef> parents,
              std::function<void(const Tensor&)> backfn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backfn = std::move(backfn);
  }
  return Var(n);
}

std::array<int, 4> broadcast_shape(const Tensor& a, const Tensor& b) {
  const auto sa = a.shape(), sb = b.shape();
  std::array<int, 4> out{};
  for (int i = 0; i < 4; ++i) {
    if (sa[i] == sb[i]) out[i] = sa[i];
    else if (sa[i] == 1) out[i] = sb[i];
    else if (sb[i] == 1) out[i] = sa[i];
    else throw std::invalid_argument("broadcast: incompatible shapes");
  }
  return out;
}

// Element strides against a broadcast output shape; 0 on expanded axes.
struct BStride {
  std::size_t n, c, h, w;
};

BStride strides_for(const Tensor& t, const std::array<int, 4>& out) {
  const std::size_t sw = 1;
  const std::size_t sh = t.w();
  const std::size_t sc = static_cast<std::size_t>(t.h()) * t.w();
  const std::size_t sn = sc * t.c();
  return {(t.n() == 1 && out[0] > 1) ? 0 : sn, (t.c() == 1 && out[1] > 1) ? 0 : sc,
          (t.h() == 1 && out[2] > 1) ? 0 : sh, (t.w() == 1 && out[3] > 1) ? 0 : sw};
}

template <class F>
Tensor ew_binary(const Tensor& a, const Tensor& b, F&& f) {
  const auto os = broadcast_shape(a, b);
  Tensor out(os[0], os[1], os[2], os[3]);
  const BStride as = strides_for(a, os), bs = strides_for(b, os);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  std::size_t i = 0;
  for (int n = 0; n < os[0]; ++n)
    for (int c = 0; c < os[1]; ++c)
      for (int y = 0; y < os[2]; ++y) {
        const double* ra = pa + n * as.n + c * as.c + y * as.h;
        const double* rb = pb + n * bs.n + c * bs.c + y * bs.h;
        for (int x = 0; x < os[3]; ++x)
          po[i++] = f(ra[x * as.w], rb[x * bs.w]);
      }
  return out;
}

// Accumulates df(a_i, b_i, g_i) into the (possibly broadcast) operand's grad.
template <class F>
void accumulate_operand(Node& op, const Node& a, const Node& b, const Tensor& g, F&& df) {
  ensure_grad(op);
  const auto os = g.shape();
  const BStride ts = strides_for(op.value, os);
  const BStride as = strides_for(a.value, os), bs = strides_for(b.value, os);
  const double* pa = a.value.data();
  const double* pb = b.value.data();
  const double* pg = g.data();
  double* pt = op.grad.data();
  std::size_t i = 0;
  for (int n = 0; n < os[0]; ++n)
    for (int c = 0; c < os[1]; ++c)
      for (int y = 0; y < os[2]; ++y) {
        const double* ra = pa + n * as.n + c * as.c + y * as.h;
        const double* rb = pb + n * bs.n + c * bs.c + y * bs.h;
        double* rt = pt + n * ts.n + c * ts.c + y * ts.h;
        for (int x = 0; x < os[3]; ++x)
          rt[x * ts.w] += df(ra[x * as.w], rb[x * bs.w], pg[i++]);
      }
}

template <class FA, class FB>
Var binary_op(const Var& a, const Var& b, Tensor value, FA&& dfa, FB&& dfb) {
  NodeRef na = a.node(), nb = b.node();
  return make_node(std::move(value), {na, nb},
                   [na, nb, dfa, dfb](const Tensor& g) {
                     if (na->requires_grad) accumulate_operand(*na, *na, *nb, g, dfa);
                     if (nb->requires_grad) accumulate_operand(*nb, *na, *nb, g, dfb);
                   });
}

void check_defined(const Var& v, const char* who) {
  if (!v.defined()) throw std::logic_error(std::string(who) + ": undefined operand");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  return binary_op(a, b, ew_binary(a.value(), b.value(), [](double x, double y) { return x + y; }),
                   [](double, double, double g) { return g; },
                   [](double, double, double g) { return g; });
}

Var sub(const Var& a, const Var& b) {
  check_defined(a, "sub");
  check_defined(b, "sub");
  return binary_op(a, b, ew_binary(a.value(), b.value(), [](double x, double y) { return x - y; }),
                   [](double, double, double g) { return g; },
                   [](double, double, double g) { return -g; });
}

Var mul(const Var& a, const Var& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  return binary_op(a, b, ew_binary(a.value(), b.value(), [](double x, double y) { return x * y; }),
                   [](double, double y, double g) { return g * y; },
                   [](double x, double, double g) { return g * x; });
}

Var div(const Var& a, const Var& b) {
  check_defined(a, "div");
  check_defined(b, "div");
  return binary_op(a, b, ew_binary(a.value(), b.value(), [](double x, double y) { return x / y; }),
                   [](double, double y, double g) { return g / y; },
                   [](double x, double y, double g) { return -g * x / (y * y); });
}

Var affine(const Var& x, double scale, double shift) {
  check_defined(x, "affine");
  const Tensor& xv = x.value();
  Tensor out = xv;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = scale * p[i] + shift;
  NodeRef nx = x.node();
  return make_node(std::move(out), {nx}, [nx, scale](const Tensor& g) {
    ensure_grad(*nx);
    double* d = nx->grad.data();
    const double* pg = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += scale * pg[i];
  });
}

Var vsqrt(const Var& x) {
  check_defined(x, "vsqrt");
  const Tensor& xv = x.value();
  Tensor out = xv;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = std::sqrt(p[i]);
  NodeRef nx = x.node();
  return make_node(std::move(out), {nx}, [nx](const Tensor& g) {
    ensure_grad(*nx);
    double* d = nx->grad.data();
    const double* px = nx->value.data();
    const double* pg = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += 0.5 / std::sqrt(px[i]) * pg[i];
  });
}

Var relu(const Var& x) {
  check_defined(x, "relu");
  const Tensor& xv = x.value();
  Tensor out = xv;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  NodeRef nx = x.node();
  return make_node(std::move(out), {nx}, [nx](const Tensor& g) {
    ensure_grad(*nx);
    double* d = nx->grad.data();
    const double* px = nx->value.data();
    const double* pg = g.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (px[i] > 0.0) d[i] += pg[i];
  });
}

namespace {

std::array<int, 4> reduced_shape(const Tensor& x, Axes a) {
  return {a.n ? 1 : x.n(), a.c ? 1 : x.c(), a.h ? 1 : x.h(), a.w ? 1 : x.w()};
}

Var reduce_impl(const Var& x, Axes axes, bool mean) {
  check_defined(x, "reduce");
  const Tensor& xv = x.value();
  const auto os = reduced_shape(xv, axes);
  Tensor out(os[0], os[1], os[2], os[3]);
  const BStride ts = strides_for(out, xv.shape());
  const double* px = xv.data();
  double* po = out.data();
  std::size_t i = 0;
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c)
      for (int y = 0; y < xv.h(); ++y) {
        double* ro = po + n * ts.n + c * ts.c + y * ts.h;
        for (int xq = 0; xq < xv.w(); ++xq) ro[xq * ts.w] += px[i++];
      }
  const double scale = mean ? 1.0 / (static_cast<double>(xv.size()) / out.size()) : 1.0;
  if (mean)
    for (std::size_t k = 0; k < out.size(); ++k) po[k] *= scale;
  NodeRef nx = x.node();
  const auto xs = xv.shape();
  return make_node(std::move(out), {nx}, [nx, xs, scale](const Tensor& g) {
    ensure_grad(*nx);
    const BStride gs = strides_for(g, xs);
    const double* pg = g.data();
    double* d = nx->grad.data();
    std::size_t i = 0;
    for (int n = 0; n < xs[0]; ++n)
      for (int c = 0; c < xs[1]; ++c)
        for (int y = 0; y < xs[2]; ++y) {
          const double* rg = pg + n * gs.n + c * gs.c + y * gs.h;
          for (int xq = 0; xq < xs[3]; ++xq) d[i++] += scale * rg[xq * gs.w];
        }
  });
}

}  // namespace

Var reduce_sum(const Var& x, Axes axes) { return reduce_impl(x, axes, false); }
Var reduce_mean(const Var& x, Axes axes) { return reduce_impl(x, axes, true); }

Var reduce_max(const Var& x, Axes axes) {
  check_defined(x, "reduce_max");
  const Tensor& xv = x.value();
  const auto os = reduced_shape(xv, axes);
  Tensor out = Tensor::full(os[0], os[1], os[2], os[3],
                            -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> argmax(out.size(), 0);
  const BStride ts = strides_for(out, xv.shape());
  const double* px = xv.data();
  double* po = out.data();
  std::size_t i = 0;
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c)
      for (int y = 0; y < xv.h(); ++y)
        for (int xq = 0; xq < xv.w(); ++xq, ++i) {
          const std::size_t o = n * ts.n + c * ts.c + y * ts.h + xq * ts.w;
          if (px[i] > po[o]) {
            po[o] = px[i];
            argmax[o] = i;
          }
        }
  NodeRef nx = x.node();
  return make_node(std::move(out), {nx}, [nx, argmax](const Tensor& g) {
    ensure_grad(*nx);
    double* d = nx->grad.data();
    const double* pg = g.data();
    for (std::size_t o = 0; o < g.size(); ++o) d[argmax[o]] += pg[o];
  });
}

Var sum_all(const Var& x) { return reduce_sum(x, {true, true, true, true}); }
Var mean_all(const Var& x) { return reduce_mean(x, {true, true, true, true}); }

namespace {

void im2col(const double* x, int ci, int h, int w, int kh, int kw, int stride,
            int pad, int ho, int wo, double* col) {
  const std::size_t m = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < ci; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* dst = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * m;
        for (int oy = 0; oy < ho; ++oy, dst += wo) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
}

void col2im_add(const double* col, int ci, int h, int w, int kh, int kw, int stride,
                int pad, int ho, int wo, double* gx) {
  const std::size_t m = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < ci; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* src = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * m;
        for (int oy = 0; oy < ho; ++oy, src += wo) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          double* dst = gx + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  check_defined(x, "conv2d");
  check_defined(weight, "conv2d");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
  if (wv.c() != xv.c()) throw std::invalid_argument("conv2d: channel mismatch");
  const int n = xv.n(), ci = xv.c(), h = xv.h(), w = xv.w();
  const int co = wv.n(), kh = wv.h(), kw = wv.w();
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  if (h + 2 * pad < kh || w + 2 * pad < kw)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  if (bias.defined()) {
    const Tensor& bv = bias.value();
    if (bv.n() != 1 || bv.c() != co || bv.h() != 1 || bv.w() != 1)
      throw std::invalid_argument("conv2d: bias shape");
  }

  const std::size_t k = static_cast<std::size_t>(ci) * kh * kw;
  const std::size_t m = static_cast<std::size_t>(ho) * wo;
  Tensor out(n, co, ho, wo);
  {
    thread_local std::vector<double> col;
    col.resize(k * m);
    MapConstMat wm(wv.data(), co, k);
    for (int b = 0; b < n; ++b) {
      im2col(xv.data() + xv.index(b, 0, 0, 0), ci, h, w, kh, kw, stride, pad, ho, wo,
             col.data());
      MapConstMat cm(col.data(), k, m);
      MapMat om(out.data() + out.index(b, 0, 0, 0), co, m);
      om.noalias() = wm * cm;
    }
  }
  if (bias.defined()) {
    const double* bv = bias.value().data();
    double* po = out.data();
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < co; ++c) {
        const double bc = bv[c];
        double* row = po + out.index(b, c, 0, 0);
        for (std::size_t i = 0; i < m; ++i) row[i] += bc;
      }
  }

  NodeRef nx = x.node(), nw = weight.node();
  NodeRef nb = bias.defined() ? bias.node() : nullptr;
  std::vector<NodeRef> parents{nx, nw};
  if (nb) parents.push_back(nb);
  return make_node(
      std::move(out), std::move(parents),
      [nx, nw, nb, n, ci, h, w, co, kh, kw, stride, pad, ho, wo, k, m](const Tensor& g) {
        thread_local std::vector<double> col, gcol;
        if (nb && nb->requires_grad) {
          ensure_grad(*nb);
          double* gb = nb->grad.data();
          const double* pg = g.data();
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < co; ++c) {
              const double* row = pg + g.index(b, c, 0, 0);
              double s = 0.0;
              for (std::size_t i = 0; i < m; ++i) s += row[i];
              gb[c] += s;
            }
        }
        if (nw->requires_grad) {
          ensure_grad(*nw);
          col.resize(k * m);
          MapMat gwm(nw->grad.data(), co, k);
          for (int b = 0; b < n; ++b) {
            im2col(nx->value.data() + nx->value.index(b, 0, 0, 0), ci, h, w, kh, kw,
                   stride, pad, ho, wo, col.data());
            MapConstMat cm(col.data(), k, m);
            MapConstMat gm(g.data() + g.index(b, 0, 0, 0), co, m);
            gwm.noalias() += gm * cm.transpose();
          }
        }
        if (nx->requires_grad) {
          ensure_grad(*nx);
          gcol.resize(k * m);
          MapConstMat wm(nw->value.data(), co, k);
          for (int b = 0; b < n; ++b) {
            MapConstMat gm(g.data() + g.index(b, 0, 0, 0), co, m);
            MapMat gcm(gcol.data(), k, m);
            gcm.noalias() = wm.transpose() * gm;
            col2im_add(gcol.data(), ci, h, w, kh, kw, stride, pad, ho, wo,
                       nx->grad.data() + nx->grad.index(b, 0, 0, 0));
          }
        }
      });
}

namespace {

// Half-pixel source coordinates with edge clamping, the standard
// align_corners=false convention.
void resize_taps(int in, int out, std::vector<int>& i0, std::vector<int>& i1,
                 std::vector<double>& f) {
  i0.resize(out);
  i1.resize(out);
  f.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    double fr = src - lo;
    if (lo >= in - 1) {
      lo = in - 1;
      fr = 0.0;
    }
    i0[o] = lo;
    i1[o] = lo + 1 < in ? lo + 1 : in - 1;
    f[o] = fr;
  }
}

}  // namespace

Var bilinear_resize(const Var& x, int out_h, int out_w) {
  check_defined(x, "bilinear_resize");
  const Tensor& xv = x.value();
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad size");
  if (out_h == xv.h() && out_w == xv.w()) return x;

  const int n = xv.n(), c = xv.c(), h = xv.h(), w = xv.w();
  std::vector<int> y0, y1, x0, x1;
  std::vector<double> fy, fx;
  resize_taps(h, out_h, y0, y1, fy);
  resize_taps(w, out_w, x0, x1, fx);

  Tensor out(n, c, out_h, out_w);
  const double* px = xv.data();
  double* po = out.data();
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = px + xv.index(b, ch, 0, 0);
      for (int oy = 0; oy < out_h; ++oy) {
        const double* r0 = plane + static_cast<std::size_t>(y0[oy]) * w;
        const double* r1 = plane + static_cast<std::size_t>(y1[oy]) * w;
        const double wy = fy[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const double wxf = fx[ox];
          const double top = r0[x0[ox]] * (1.0 - wxf) + r0[x1[ox]] * wxf;
          const double bot = r1[x0[ox]] * (1.0 - wxf) + r1[x1[ox]] * wxf;
          *po++ = top * (1.0 - wy) + bot * wy;
        }
      }
    }

  NodeRef nx = x.node();
  return make_node(std::move(out), {nx},
                   [nx, n, c, h, w, out_h, out_w, y0, y1, x0, x1, fy, fx](const Tensor& g) {
                     ensure_grad(*nx);
                     const double* pg = g.data();
                     double* d = nx->grad.data();
                     for (int b = 0; b < n; ++b)
                       for (int ch = 0; ch < c; ++ch) {
                         double* plane = d + nx->grad.index(b, ch, 0, 0);
                         for (int oy = 0; oy < out_h; ++oy) {
                           double* r0 = plane + static_cast<std::size_t>(y0[oy]) * w;
                           double* r1 = plane + static_cast<std::size_t>(y1[oy]) * w;
                           const double wy = fy[oy];
                           for (int ox = 0; ox < out_w; ++ox) {
                             const double gv = *pg++;
                             const double wxf = fx[ox];
                             r0[x0[ox]] += gv * (1.0 - wxf) * (1.0 - wy);
                             r0[x1[ox]] += gv * wxf * (1.0 - wy);
                             r1[x0[ox]] += gv * (1.0 - wxf) * wy;
                             r1[x1[ox]] += gv * wxf * wy;
                           }
                         }
                       }
                   });
}

namespace {

Var norm_with_axes(const Var& x, const Var& gamma, const Var& beta, double eps, Axes axes) {
  Var mu = reduce_mean(x, axes);
  Var xc = sub(x, mu);
  Var var = reduce_mean(mul(xc, xc), axes);
  Var stddev = vsqrt(affine(var, 1.0, eps));
  Var xn = div(xc, stddev);
  return add(mul(xn, gamma), beta);
}

}  // namespace

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  return norm_with_axes(x, gamma, beta, eps, {true, false, true, true});
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  return norm_with_axes(x, gamma, beta, eps, {false, false, true, true});
}

Var softmax_cross_entropy(const Var& logits, const LabelMap& labels, int ignore_label) {
  check_defined(logits, "softmax_cross_entropy");
  const Tensor& z = logits.value();
  const int b = z.n(), k = z.c(), h = z.h(), w = z.w();
  if (labels.n != b || labels.h != h || labels.w != w)
    throw std::invalid_argument("softmax_cross_entropy: label shape mismatch");

  // probs are cached for the backward pass
  auto probs = std::make_shared<Tensor>(b, k, h, w);
  std::vector<double> inv_count(b, 0.0);
  double total = 0.0;
  const double* pz = z.data();
  double* pp = probs->data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int n = 0; n < b; ++n) {
    std::int64_t valid = 0;
    double sample_loss = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::int32_t lab = labels.at(n, y, x);
        const std::size_t base = z.index(n, 0, y, x);
        double zmax = pz[base];
        for (int c = 1; c < k; ++c)
          zmax = std::max(zmax, pz[base + c * plane]);
        double se = 0.0;
        for (int c = 0; c < k; ++c) se += std::exp(pz[base + c * plane] - zmax);
        const double lse = std::log(se) + zmax;
        for (int c = 0; c < k; ++c)
          pp[base + c * plane] = std::exp(pz[base + c * plane] - lse);
        if (lab == ignore_label) continue;
        if (lab < 0 || lab >= k)
          throw std::out_of_range("softmax_cross_entropy: label out of range");
        valid++;
        sample_loss += lse - pz[base + lab * plane];
      }
    if (valid > 0) {
      inv_count[n] = 1.0 / static_cast<double>(valid);
      total += sample_loss * inv_count[n];
    }
  }
  Tensor out(1, 1, 1, 1);
  out[0] = total / b;

  NodeRef nz = logits.node();
  LabelMap labs = labels;
  return make_node(std::move(out), {nz},
                   [nz, probs, labs, inv_count, ignore_label, b, k, h, w,
                    plane](const Tensor& g) {
                     ensure_grad(*nz);
                     const double gs = g[0] / b;
                     double* d = nz->grad.data();
                     const double* pp = probs->data();
                     for (int n = 0; n < b; ++n) {
                       if (inv_count[n] == 0.0) continue;
                       const double scale = gs * inv_count[n];
                       for (int y = 0; y < h; ++y)
                         for (int x = 0; x < w; ++x) {
                           const std::int32_t lab = labs.at(n, y, x);
                           if (lab == ignore_label) continue;
                           const std::size_t base = nz->grad.index(n, 0, y, x);
                           for (int c = 0; c < k; ++c)
                             d[base + c * plane] += scale * pp[base + c * plane];
                           d[base + lab * plane] -= scale;
                         }
                     }
                   });
}

void backward(const Var& scalar_root) {
  check_defined(scalar_root, "backward");
  NodeRef root = scalar_root.node();
  if (root->value.size() != 1) throw std::invalid_argument("backward: root is not scalar");
  if (!root->requires_grad) return;

  // post-order over parents: every node appears after all of its parents
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    ensure_grad(*n);
    n->grad.fill(0.0);
  }
  root->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backfn) n->backfn(n->grad);
  }

  for (Node* n : order) {
    if (n->param) {
      double* d = n->param->grad.data();
      const double* s = n->grad.data();
      for (std::size_t i = 0; i < n->grad.size(); ++i) d[i] += s[i];
    }
  }
}

}  // namespace mrfp
