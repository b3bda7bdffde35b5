#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hetplan/nn/tensor.hpp"

namespace hetplan::nn {

inline constexpr double kProbEps = 1e-7;
inline constexpr double kLeakySlope = 0.2;

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Reverse-mode recorder for the fixed set of operations the planner's
/// networks use. Each op appends a node; backward() walks them in reverse.
/// Parameters bound with param() receive their gradient in ParamTensor::grad
/// (accumulated, so several tapes can feed one optimizer step).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- leaves ---------------------------------------------------------------

  Var constant(Shape shape, std::vector<double> value) {
    if (value.size() != numel(shape)) {
      throw ShapeError("constant: " + std::to_string(value.size()) + " values for shape " +
                       shape_str(shape));
    }
    return push(std::move(shape), std::move(value), false);
  }

  Var constant(const Tensor& t) { return constant(t.shape, t.data); }

  Var param(ParamTensor& p) {
    Var v = push(p.shape, p.values, true);
    nodes_[v.id].param = &p;
    return v;
  }

  // -- accessors ------------------------------------------------------------

  const std::vector<double>& value(Var v) const { return nodes_.at(v.id).value; }
  const Shape& shape(Var v) const { return nodes_.at(v.id).shape; }
  double scalar(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (n.value.size() != 1) throw ShapeError("scalar(): value has shape " + shape_str(n.shape));
    return n.value[0];
  }
  /// Gradient after backward(); zeros when the node received none.
  std::vector<double> grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
    return n.grad;
  }
  Tensor tensor(Var v) const { return Tensor(shape(v), value(v)); }
  std::size_t size() const { return nodes_.size(); }

  // -- linear algebra -------------------------------------------------------

  /// x [n x k] times w^T where w is [m x k]; result [n x m].
  Var matmul_nt(Var x, Var w) {
    const Shape& xs = shape(x);
    const Shape& ws = shape(w);
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
      throw ShapeError("matmul_nt: input " + shape_str(xs) + " incompatible with weight " +
                       shape_str(ws));
    }
    const std::size_t n = xs[0], k = xs[1], m = ws[0];
    std::vector<double> out(n * m, 0.0);
    const auto& xv = value(x);
    const auto& wv = value(w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) acc += xv[i * k + t] * wv[j * k + t];
        out[i * m + j] = acc;
      }
    Var r = push({n, m}, std::move(out), needs(x) || needs(w));
    record(r, [this, x, w, r, n, k, m] {
      const auto& g = nodes_[r.id].grad;
      if (needs(x)) {
        auto& gx = grad_ref(x);
        const auto& wv2 = nodes_[w.id].value;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            const double gij = g[i * m + j];
            if (gij == 0.0) continue;
            for (std::size_t t = 0; t < k; ++t) gx[i * k + t] += gij * wv2[j * k + t];
          }
      }
      if (needs(w)) {
        auto& gw = grad_ref(w);
        const auto& xv2 = nodes_[x.id].value;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            const double gij = g[i * m + j];
            if (gij == 0.0) continue;
            for (std::size_t t = 0; t < k; ++t) gw[j * k + t] += gij * xv2[i * k + t];
          }
      }
    });
    return r;
  }

  /// Adds a bias vector b [m] to every row of x [n x m].
  Var add_row_bias(Var x, Var b) {
    const Shape& xs = shape(x);
    if (xs.size() != 2 || numel(shape(b)) != xs[1]) {
      throw ShapeError("add_row_bias: input " + shape_str(xs) + " with bias " +
                       shape_str(shape(b)));
    }
    const std::size_t n = xs[0], m = xs[1];
    std::vector<double> out = value(x);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
    Var r = push(xs, std::move(out), needs(x) || needs(b));
    record(r, [this, x, b, r, n, m] {
      const auto& g = nodes_[r.id].grad;
      if (needs(x)) add_into(grad_ref(x), g);
      if (needs(b)) {
        auto& gb = grad_ref(b);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
      }
    });
    return r;
  }

  /// Fully connected layer: x [n x in] -> [n x out] with W [out x in], b [out].
  Var dense(Var x, Var w, Var b) {
    Var y = matmul_nt(x, w);
    return b.valid() ? add_row_bias(y, b) : y;
  }

  // -- elementwise ----------------------------------------------------------

  Var add(Var a, Var b) {
    same_size("add", a, b);
    std::vector<double> out = value(a);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    Var r = push(shape(a), std::move(out), needs(a) || needs(b));
    record(r, [this, a, b, r] {
      const auto& g = nodes_[r.id].grad;
      if (needs(a)) add_into(grad_ref(a), g);
      if (needs(b)) add_into(grad_ref(b), g);
    });
    return r;
  }

  Var mul(Var a, Var b) {
    same_size("mul", a, b);
    const auto& av = value(a);
    const auto& bv = value(b);
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    Var r = push(shape(a), std::move(out), needs(a) || needs(b));
    record(r, [this, a, b, r] {
      const auto& g = nodes_[r.id].grad;
      const auto& av2 = nodes_[a.id].value;
      const auto& bv2 = nodes_[b.id].value;
      if (needs(a)) {
        auto& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
      }
      if (needs(b)) {
        auto& gb = grad_ref(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
      }
    });
    return r;
  }

  Var scale(Var a, double s) {
    std::vector<double> out = value(a);
    for (double& v : out) v *= s;
    Var r = push(shape(a), std::move(out), needs(a));
    record(r, [this, a, r, s] {
      const auto& g = nodes_[r.id].grad;
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
    return r;
  }

  Var elu(Var x) {
    return unary(x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
                 [](double v, double) { return v > 0.0 ? 1.0 : std::exp(v); });
  }

  Var leaky_relu(Var x, double slope = kLeakySlope) {
    return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
                 [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
  }

  Var sigmoid(Var x) {
    return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                 [](double, double y) { return y * (1.0 - y); });
  }

  // -- structural -----------------------------------------------------------

  Var reshape(Var x, Shape s) {
    if (numel(s) != numel(shape(x))) {
      throw ShapeError("reshape: " + shape_str(shape(x)) + " to " + shape_str(s));
    }
    Var r = push(std::move(s), value(x), needs(x));
    record(r, [this, x, r] { add_into(grad_ref(x), nodes_[r.id].grad); });
    return r;
  }

  /// Selects rows of x [n x d] by index; result [idx.size() x d].
  Var gather_rows(Var x, std::vector<std::size_t> idx) {
    const Shape& xs = shape(x);
    if (xs.size() != 2) throw ShapeError("gather_rows: expected matrix, got " + shape_str(xs));
    const std::size_t n = xs[0], d = xs[1];
    const auto& xv = value(x);
    std::vector<double> out(idx.size() * d);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= n) throw ShapeError("gather_rows: index out of range");
      std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d,
                  out.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    Var res = push({idx.size(), d}, std::move(out), needs(x));
    record(res, [this, x, res, d, idx = std::move(idx)] {
      const auto& g = nodes_[res.id].grad;
      auto& gx = grad_ref(x);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) gx[idx[r] * d + c] += g[r * d + c];
    });
    return res;
  }

  /// Sums rows of x [e x d] into `rows` output rows: out[idx[r]] += x[r].
  /// Rows are accumulated in input order.
  Var scatter_add_rows(Var x, std::vector<std::size_t> idx, std::size_t rows) {
    const Shape& xs = shape(x);
    if (xs.size() != 2 || xs[0] != idx.size()) {
      throw ShapeError("scatter_add_rows: input " + shape_str(xs) + " with " +
                       std::to_string(idx.size()) + " indices");
    }
    const std::size_t d = xs[1];
    const auto& xv = value(x);
    std::vector<double> out(rows * d, 0.0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= rows) throw ShapeError("scatter_add_rows: index out of range");
      for (std::size_t c = 0; c < d; ++c) out[idx[r] * d + c] += xv[r * d + c];
    }
    Var res = push({rows, d}, std::move(out), needs(x));
    record(res, [this, x, res, d, idx = std::move(idx)] {
      const auto& g = nodes_[res.id].grad;
      auto& gx = grad_ref(x);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[idx[r] * d + c];
    });
    return res;
  }

  /// Multiplies row r of x [e x d] by s[r].
  Var scale_rows(Var x, Var s) {
    const Shape& xs = shape(x);
    if (xs.size() != 2 || numel(shape(s)) != xs[0]) {
      throw ShapeError("scale_rows: input " + shape_str(xs) + " with scales " +
                       shape_str(shape(s)));
    }
    const std::size_t e = xs[0], d = xs[1];
    const auto& xv = value(x);
    const auto& sv = value(s);
    std::vector<double> out(e * d);
    for (std::size_t r = 0; r < e; ++r)
      for (std::size_t c = 0; c < d; ++c) out[r * d + c] = xv[r * d + c] * sv[r];
    Var res = push(xs, std::move(out), needs(x) || needs(s));
    record(res, [this, x, s, res, e, d] {
      const auto& g = nodes_[res.id].grad;
      const auto& xv2 = nodes_[x.id].value;
      const auto& sv2 = nodes_[s.id].value;
      if (needs(x)) {
        auto& gx = grad_ref(x);
        for (std::size_t r = 0; r < e; ++r)
          for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[r * d + c] * sv2[r];
      }
      if (needs(s)) {
        auto& gs = grad_ref(s);
        for (std::size_t r = 0; r < e; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d; ++c) acc += g[r * d + c] * xv2[r * d + c];
          gs[r] += acc;
        }
      }
    });
    return res;
  }

  /// Stacks matrices with equal column counts (or vectors) end to end.
  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const Shape& first = shape(parts.front());
    const std::size_t d = first.size() == 2 ? first[1] : 1;
    std::size_t rows = 0;
    std::vector<double> out;
    bool req = false;
    for (Var p : parts) {
      const Shape& ps = shape(p);
      const std::size_t pd = ps.size() == 2 ? ps[1] : 1;
      if (pd != d || ps.size() != first.size()) {
        throw ShapeError("concat_rows: " + shape_str(ps) + " does not stack with " +
                         shape_str(first));
      }
      rows += numel(ps) / d;
      out.insert(out.end(), value(p).begin(), value(p).end());
      req = req || needs(p);
    }
    Shape s = first.size() == 2 ? Shape{rows, d} : Shape{rows};
    Var res = push(std::move(s), std::move(out), req);
    record(res, [this, parts, res] {
      const auto& g = nodes_[res.id].grad;
      std::size_t off = 0;
      for (Var p : parts) {
        const std::size_t len = nodes_[p.id].value.size();
        if (needs(p)) {
          auto& gp = grad_ref(p);
          for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
        }
        off += len;
      }
    });
    return res;
  }

  /// Concatenates matrices with equal row counts side by side.
  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = shape(parts.front())[0];
    std::size_t cols = 0;
    bool req = false;
    for (Var p : parts) {
      const Shape& ps = shape(p);
      if (ps.size() != 2 || ps[0] != n) {
        throw ShapeError("concat_cols: " + shape_str(ps) + " has wrong row count");
      }
      cols += ps[1];
      req = req || needs(p);
    }
    std::vector<double> out(n * cols);
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t pc = shape(p)[1];
      const auto& pv = value(p);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < pc; ++c) out[i * cols + off + c] = pv[i * pc + c];
      off += pc;
    }
    Var res = push({n, cols}, std::move(out), req);
    record(res, [this, parts, res, n, cols] {
      const auto& g = nodes_[res.id].grad;
      std::size_t off2 = 0;
      for (Var p : parts) {
        const std::size_t pc = nodes_[p.id].shape[1];
        if (needs(p)) {
          auto& gp = grad_ref(p);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < pc; ++c) gp[i * pc + c] += g[i * cols + off2 + c];
        }
        off2 += pc;
      }
    });
    return res;
  }

  // -- normalization --------------------------------------------------------

  /// Row-wise softmax of x [n x m].
  Var softmax_rows(Var x) {
    const Shape& xs = shape(x);
    if (xs.size() != 2) throw ShapeError("softmax_rows: expected matrix, got " + shape_str(xs));
    const std::size_t n = xs[0], m = xs[1];
    std::vector<std::size_t> seg(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) seg[i * m + j] = i;
    Var flat = reshape(x, {n * m});
    return reshape(segment_softmax(flat, std::move(seg), n), {n, m});
  }

  /// Softmax over groups of a vector: entries with equal segment id are
  /// normalized together. Used for attention over each node's neighborhood.
  Var segment_softmax(Var x, std::vector<std::size_t> seg, std::size_t segments) {
    const auto& xv = value(x);
    if (xv.size() != seg.size()) {
      throw ShapeError("segment_softmax: " + std::to_string(xv.size()) + " logits, " +
                       std::to_string(seg.size()) + " segment ids");
    }
    std::vector<double> mx(segments, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (seg[i] >= segments) throw ShapeError("segment_softmax: segment id out of range");
      mx[seg[i]] = std::max(mx[seg[i]], xv[i]);
    }
    std::vector<double> out(xv.size());
    std::vector<double> den(segments, 0.0);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      out[i] = std::exp(xv[i] - mx[seg[i]]);
      den[seg[i]] += out[i];
    }
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] /= den[seg[i]];
    Var r = push(shape(x), std::move(out), needs(x));
    record(r, [this, x, r, segments, seg = std::move(seg)] {
      const auto& g = nodes_[r.id].grad;
      const auto& y = nodes_[r.id].value;
      std::vector<double> dot(segments, 0.0);
      for (std::size_t i = 0; i < y.size(); ++i) dot[seg[i]] += g[i] * y[i];
      auto& gx = grad_ref(x);
      for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - dot[seg[i]]);
    });
    return r;
  }

  // -- volumetric -----------------------------------------------------------

  /// 3D convolution, stride 1, zero padding `pad` on every side.
  /// x [C x D x H x W], w [O x C x K x K x K], b [O] -> [O x D' x H' x W'].
  Var conv3d(Var x, Var w, Var b, std::size_t pad = 0) {
    const Shape& xs = shape(x);
    const Shape& ws = shape(w);
    if (xs.size() != 4 || ws.size() != 5 || ws[1] != xs[0] || ws[2] != ws[3] ||
        ws[3] != ws[4] || numel(shape(b)) != ws[0]) {
      throw ShapeError("conv3d: input " + shape_str(xs) + ", weight " + shape_str(ws) +
                       ", bias " + shape_str(shape(b)));
    }
    const std::size_t C = xs[0], O = ws[0], K = ws[2];
    const std::size_t D = xs[1] + 2 * pad, H = xs[2] + 2 * pad, W = xs[3] + 2 * pad;
    if (D < K || H < K || W < K) {
      throw ShapeError("conv3d: kernel " + std::to_string(K) + " larger than padded input " +
                       shape_str(xs));
    }
    const std::size_t Do = D - K + 1, Ho = H - K + 1, Wo = W - K + 1;
    auto xp = std::make_shared<std::vector<double>>(pad_volume(value(x), xs, pad));
    const auto& wv = value(w);
    const auto& bv = value(b);
    std::vector<double> out(O * Do * Ho * Wo);
    for (std::size_t o = 0; o < O; ++o) {
      double* dst0 = out.data() + o * Do * Ho * Wo;
      std::fill(dst0, dst0 + Do * Ho * Wo, bv[o]);
      for (std::size_t c = 0; c < C; ++c) {
        const double* src0 = xp->data() + c * D * H * W;
        for (std::size_t kz = 0; kz < K; ++kz)
          for (std::size_t ky = 0; ky < K; ++ky)
            for (std::size_t kx = 0; kx < K; ++kx) {
              const double wk = wv[(((o * C + c) * K + kz) * K + ky) * K + kx];
              for (std::size_t z = 0; z < Do; ++z)
                for (std::size_t y = 0; y < Ho; ++y) {
                  const double* src = src0 + ((z + kz) * H + (y + ky)) * W + kx;
                  double* dst = dst0 + (z * Ho + y) * Wo;
                  for (std::size_t i = 0; i < Wo; ++i) dst[i] += wk * src[i];
                }
            }
      }
    }
    Var r = push({O, Do, Ho, Wo}, std::move(out), needs(x) || needs(w) || needs(b));
    record(r, [this, x, w, b, r, xp, C, O, K, D, H, W, Do, Ho, Wo, pad] {
      const auto& g = nodes_[r.id].grad;
      const auto& wv2 = nodes_[w.id].value;
      std::vector<double> gxp;
      if (needs(x)) gxp.assign(C * D * H * W, 0.0);
      double* gw = needs(w) ? grad_ref(w).data() : nullptr;
      for (std::size_t o = 0; o < O; ++o) {
        const double* g0 = g.data() + o * Do * Ho * Wo;
        if (needs(b)) {
          double acc = 0.0;
          for (std::size_t i = 0; i < Do * Ho * Wo; ++i) acc += g0[i];
          grad_ref(b)[o] += acc;
        }
        for (std::size_t c = 0; c < C; ++c) {
          const double* src0 = xp->data() + c * D * H * W;
          double* gsrc0 = gxp.empty() ? nullptr : gxp.data() + c * D * H * W;
          for (std::size_t kz = 0; kz < K; ++kz)
            for (std::size_t ky = 0; ky < K; ++ky)
              for (std::size_t kx = 0; kx < K; ++kx) {
                const std::size_t wi = (((o * C + c) * K + kz) * K + ky) * K + kx;
                const double wk = wv2[wi];
                double acc = 0.0;
                for (std::size_t z = 0; z < Do; ++z)
                  for (std::size_t y = 0; y < Ho; ++y) {
                    const std::size_t so = ((z + kz) * H + (y + ky)) * W + kx;
                    const double* gr = g0 + (z * Ho + y) * Wo;
                    if (gw) {
                      const double* src = src0 + so;
                      for (std::size_t i = 0; i < Wo; ++i) acc += gr[i] * src[i];
                    }
                    if (gsrc0) {
                      double* gs = gsrc0 + so;
                      for (std::size_t i = 0; i < Wo; ++i) gs[i] += wk * gr[i];
                    }
                  }
                if (gw) gw[wi] += acc;
              }
        }
      }
      if (!gxp.empty()) {
        auto& gx = grad_ref(x);
        const Shape& xs2 = nodes_[x.id].shape;
        for (std::size_t c = 0; c < xs2[0]; ++c)
          for (std::size_t z = 0; z < xs2[1]; ++z)
            for (std::size_t y = 0; y < xs2[2]; ++y)
              for (std::size_t i = 0; i < xs2[3]; ++i)
                gx[((c * xs2[1] + z) * xs2[2] + y) * xs2[3] + i] +=
                    gxp[((c * D + z + pad) * H + y + pad) * W + i + pad];
      }
    });
    return r;
  }

  /// Max pooling with window 2 and stride 2 over the three spatial axes.
  Var maxpool3d(Var x) {
    const Shape& xs = shape(x);
    if (xs.size() != 4 || xs[1] < 2 || xs[2] < 2 || xs[3] < 2) {
      throw ShapeError("maxpool3d: input " + shape_str(xs) + " needs 4 dims each >= 2");
    }
    const std::size_t C = xs[0], D = xs[1], H = xs[2], W = xs[3];
    const std::size_t Do = D / 2, Ho = H / 2, Wo = W / 2;
    const auto& xv = value(x);
    std::vector<double> out(C * Do * Ho * Wo);
    std::vector<std::size_t> arg(out.size());
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t z = 0; z < Do; ++z)
        for (std::size_t y = 0; y < Ho; ++y)
          for (std::size_t i = 0; i < Wo; ++i) {
            std::size_t best = ((c * D + 2 * z) * H + 2 * y) * W + 2 * i;
            for (std::size_t dz = 0; dz < 2; ++dz)
              for (std::size_t dy = 0; dy < 2; ++dy)
                for (std::size_t dx = 0; dx < 2; ++dx) {
                  const std::size_t s = ((c * D + 2 * z + dz) * H + 2 * y + dy) * W + 2 * i + dx;
                  if (xv[s] > xv[best]) best = s;
                }
            const std::size_t o = ((c * Do + z) * Ho + y) * Wo + i;
            out[o] = xv[best];
            arg[o] = best;
          }
    Var r = push({C, Do, Ho, Wo}, std::move(out), needs(x));
    record(r, [this, x, r, arg = std::move(arg)] {
      const auto& g = nodes_[r.id].grad;
      auto& gx = grad_ref(x);
      for (std::size_t o = 0; o < g.size(); ++o) gx[arg[o]] += g[o];
    });
    return r;
  }

  /// Nearest-neighbor upsampling by 2 along the three spatial axes.
  Var upsample3d(Var x) {
    const Shape& xs = shape(x);
    if (xs.size() != 4) throw ShapeError("upsample3d: input " + shape_str(xs) + " needs 4 dims");
    const std::size_t C = xs[0], D = xs[1], H = xs[2], W = xs[3];
    const auto& xv = value(x);
    std::vector<double> out(C * 8 * D * H * W);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t z = 0; z < 2 * D; ++z)
        for (std::size_t y = 0; y < 2 * H; ++y)
          for (std::size_t i = 0; i < 2 * W; ++i)
            out[((c * 2 * D + z) * 2 * H + y) * 2 * W + i] =
                xv[((c * D + z / 2) * H + y / 2) * W + i / 2];
    Var r = push({C, 2 * D, 2 * H, 2 * W}, std::move(out), needs(x));
    record(r, [this, x, r, C, D, H, W] {
      const auto& g = nodes_[r.id].grad;
      auto& gx = grad_ref(x);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t z = 0; z < 2 * D; ++z)
          for (std::size_t y = 0; y < 2 * H; ++y)
            for (std::size_t i = 0; i < 2 * W; ++i)
              gx[((c * D + z / 2) * H + y / 2) * W + i / 2] +=
                  g[((c * 2 * D + z) * 2 * H + y) * 2 * W + i];
    });
    return r;
  }

  // -- reductions and losses ------------------------------------------------

  Var sum(Var x) {
    double acc = 0.0;
    for (double v : value(x)) acc += v;
    Var r = push({1}, {acc}, needs(x));
    record(r, [this, x, r] {
      const double g = nodes_[r.id].grad[0];
      for (double& v : grad_ref(x)) v += g;
    });
    return r;
  }

  Var mean(Var x) {
    const std::size_t n = value(x).size();
    if (n == 0) throw ShapeError("mean: empty input");
    return scale(sum(x), 1.0 / static_cast<double>(n));
  }

  /// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
  Var bce(Var p, std::vector<double> target) {
    const auto& pv = value(p);
    if (pv.size() != target.size() || pv.empty()) {
      throw ShapeError("bce: " + std::to_string(pv.size()) + " predictions, " +
                       std::to_string(target.size()) + " labels");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double q = std::clamp(pv[i], kProbEps, 1.0 - kProbEps);
      acc -= target[i] * std::log(q) + (1.0 - target[i]) * std::log(1.0 - q);
    }
    const double n = static_cast<double>(pv.size());
    Var r = push({1}, {acc / n}, needs(p));
    record(r, [this, p, r, n, target = std::move(target)] {
      const double g = nodes_[r.id].grad[0] / n;
      const auto& pv2 = nodes_[p.id].value;
      auto& gp = grad_ref(p);
      for (std::size_t i = 0; i < pv2.size(); ++i) {
        if (pv2[i] < kProbEps || pv2[i] > 1.0 - kProbEps) continue;
        const double q = pv2[i];
        gp[i] += g * (-target[i] / q + (1.0 - target[i]) / (1.0 - q));
      }
    });
    return r;
  }

  /// Mean Huber loss between predictions and targets.
  Var huber(Var pred, std::vector<double> target, double delta) {
    const auto& pv = value(pred);
    if (pv.size() != target.size() || pv.empty()) {
      throw ShapeError("huber: " + std::to_string(pv.size()) + " predictions, " +
                       std::to_string(target.size()) + " targets");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double a = std::abs(target[i] - pv[i]);
      acc += a < delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
    }
    const double n = static_cast<double>(pv.size());
    Var r = push({1}, {acc / n}, needs(pred));
    record(r, [this, pred, r, n, delta, target = std::move(target)] {
      const double g = nodes_[r.id].grad[0] / n;
      const auto& pv2 = nodes_[pred.id].value;
      auto& gp = grad_ref(pred);
      for (std::size_t i = 0; i < pv2.size(); ++i) {
        const double res = pv2[i] - target[i];
        gp[i] += g * (std::abs(res) < delta ? res : delta * (res > 0 ? 1.0 : -1.0));
      }
    });
    return r;
  }

  /// Mean squared error against a constant target.
  Var mse(Var pred, std::span<const double> target) {
    const auto& pv = value(pred);
    if (pv.size() != target.size()) {
      throw ShapeError("mse: " + std::to_string(pv.size()) + " predictions, " +
                       std::to_string(target.size()) + " targets");
    }
    std::vector<double> diff(pv.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      diff[i] = pv[i] - target[i];
      acc += diff[i] * diff[i];
    }
    const double n = static_cast<double>(pv.size());
    Var r = push({1}, {acc / n}, needs(pred));
    record(r, [this, pred, r, n, diff = std::move(diff)] {
      const double g = nodes_[r.id].grad[0] * 2.0 / n;
      auto& gp = grad_ref(pred);
      for (std::size_t i = 0; i < diff.size(); ++i) gp[i] += g * diff[i];
    });
    return r;
  }

  // -- backward -------------------------------------------------------------

  /// Backpropagates from a scalar and accumulates into bound parameters.
  void backward(Var loss) {
    auto& root = nodes_.at(loss.id);
    if (root.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + shape_str(root.shape));
    }
    if (!root.requires_grad) return;
    grad_ref(loss)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward();
      if (n.param) {
        for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    ParamTensor* param = nullptr;
    std::function<void()> backward;
  };

  Var push(Shape shape, std::vector<double> value, bool requires_grad) {
    nodes_.push_back(Node{std::move(shape), std::move(value), {}, requires_grad, nullptr, {}});
    return Var{nodes_.size() - 1};
  }

  template <class F>
  void record(Var r, F&& f) {
    if (nodes_[r.id].requires_grad) nodes_[r.id].backward = std::forward<F>(f);
  }

  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<double>& grad_ref(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
  }

  static void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
  }

  void same_size(const char* op, Var a, Var b) const {
    if (value(a).size() != value(b).size()) {
      throw ShapeError(std::string(op) + ": " + shape_str(shape(a)) + " vs " +
                       shape_str(shape(b)));
    }
  }

  template <class F, class DF>
  Var unary(Var x, F f, DF df) {
    const auto& xv = value(x);
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
    Var r = push(shape(x), std::move(out), needs(x));
    record(r, [this, x, r, df] {
      const auto& g = nodes_[r.id].grad;
      const auto& xv2 = nodes_[x.id].value;
      const auto& yv = nodes_[r.id].value;
      auto& gx = grad_ref(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv2[i], yv[i]);
    });
    return r;
  }

  static std::vector<double> pad_volume(const std::vector<double>& v, const Shape& s,
                                        std::size_t pad) {
    if (pad == 0) return v;
    const std::size_t C = s[0], D = s[1], H = s[2], W = s[3];
    const std::size_t Dp = D + 2 * pad, Hp = H + 2 * pad, Wp = W + 2 * pad;
    std::vector<double> out(C * Dp * Hp * Wp, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t z = 0; z < D; ++z)
        for (std::size_t y = 0; y < H; ++y)
          std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(((c * D + z) * H + y) * W), W,
                      out.begin() + static_cast<std::ptrdiff_t>(
                                        ((c * Dp + z + pad) * Hp + y + pad) * Wp + pad));
    return out;
  }

  std::vector<Node> nodes_;
};

}  // namespace hetplan::nn
