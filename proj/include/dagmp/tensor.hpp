#pragma once

// Dense row-major 2-D tensor of doubles plus a tape-based reverse-mode
// autodiff engine. The tape holds one node per primitive op; backward()
// walks the tape in reverse creation order, which is always a valid
// topological order because ops can only reference earlier nodes.

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagmp {

struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor2: negative shape");
  }

  static Tensor2 zeros(int r, int c) { return Tensor2(r, c); }

  static Tensor2 scalar(double x) {
    Tensor2 t(1, 1);
    t.v[0] = x;
    return t;
  }

  // Column vector from values.
  static Tensor2 column(std::span<const double> xs) {
    Tensor2 t(static_cast<int>(xs.size()), 1);
    for (size_t i = 0; i < xs.size(); ++i) t.v[i] = xs[i];
    return t;
  }
  static Tensor2 column(std::initializer_list<double> xs) {
    return column(std::span<const double>(xs.begin(), xs.size()));
  }

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// Handle into a Tape. Default-constructed handles are invalid.
struct Var {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  // Leaf node. requires_grad marks trainable parameters; pure inputs
  // should stay false so backward can skip their subgraphs.
  Var leaf(Tensor2 value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, nullptr);
  }

  Var constant(Tensor2 value) { return leaf(std::move(value), false); }
  Var constant_scalar(double x) { return leaf(Tensor2::scalar(x), false); }

  const Tensor2& val(Var a) const { return node(a).val; }
  double value_of(Var a) const {
    const Tensor2& t = node(a).val;
    if (t.size() != 1) throw std::invalid_argument("value_of: not a scalar");
    return t.v[0];
  }
  // Only meaningful after backward().
  const Tensor2& grad(Var a) const { return node(a).grad; }

  Var add(Var a, Var b) {
    const Tensor2 &ta = val(a), &tb = val(b);
    require(ta.same_shape(tb), "add: shape mismatch");
    Tensor2 out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += tb.v[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor2& g, Var a2, Var b2) {
      t.accumulate(a2, g);
      t.accumulate(b2, g);
    });
  }

  Var sub(Var a, Var b) {
    const Tensor2 &ta = val(a), &tb = val(b);
    require(ta.same_shape(tb), "sub: shape mismatch");
    Tensor2 out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= tb.v[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor2& g, Var a2, Var b2) {
      t.accumulate(a2, g);
      if (t.needs(b2)) {
        Tensor2 neg = g;
        for (double& x : neg.v) x = -x;
        t.accumulate(b2, neg);
      }
    });
  }

  // Elementwise product.
  Var mul(Var a, Var b) {
    const Tensor2 &ta = val(a), &tb = val(b);
    require(ta.same_shape(tb), "mul: shape mismatch");
    Tensor2 out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= tb.v[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor2& g, Var a2, Var b2) {
      if (t.needs(a2)) {
        Tensor2 ga = g;
        const Tensor2& vb = t.val(b2);
        for (size_t i = 0; i < ga.size(); ++i) ga.v[i] *= vb.v[i];
        t.accumulate(a2, ga);
      }
      if (t.needs(b2)) {
        Tensor2 gb = g;
        const Tensor2& va = t.val(a2);
        for (size_t i = 0; i < gb.size(); ++i) gb.v[i] *= va.v[i];
        t.accumulate(b2, gb);
      }
    });
  }

  Var scale(Var a, double s) {
    Tensor2 out = val(a);
    for (double& x : out.v) x *= s;
    return unary(std::move(out), a, [s](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga = g;
      for (double& x : ga.v) x *= s;
      t.accumulate(a2, ga);
    });
  }

  Var add_scalar(Var a, double c) {
    Tensor2 out = val(a);
    for (double& x : out.v) x += c;
    return unary(std::move(out), a,
                 [](Tape& t, const Tensor2& g, Var a2) { t.accumulate(a2, g); });
  }

  Var matmul(Var a, Var b) {
    const Tensor2 &ta = val(a), &tb = val(b);
    require(ta.cols == tb.rows, "matmul: inner dimension mismatch");
    Tensor2 out(ta.rows, tb.cols);
    matmul_into(out, ta, tb, false, false);
    return binary(std::move(out), a, b, [](Tape& t, const Tensor2& g, Var a2, Var b2) {
      if (t.needs(a2)) {
        // dA += g * B^T
        Tensor2 ga(t.val(a2).rows, t.val(a2).cols);
        matmul_into(ga, g, t.val(b2), false, true);
        t.accumulate(a2, ga);
      }
      if (t.needs(b2)) {
        // dB += A^T * g
        Tensor2 gb(t.val(b2).rows, t.val(b2).cols);
        matmul_into(gb, t.val(a2), g, true, false);
        t.accumulate(b2, gb);
      }
    });
  }

  // Stack tensors with equal column counts on top of each other.
  Var concat_rows(std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows: empty list");
    int cols = val(parts[0]).cols;
    int rows = 0;
    for (Var p : parts) {
      require(val(p).cols == cols, "concat_rows: column mismatch");
      rows += val(p).rows;
    }
    Tensor2 out(rows, cols);
    size_t off = 0;
    for (Var p : parts) {
      const Tensor2& tp = val(p);
      std::copy(tp.v.begin(), tp.v.end(), out.v.begin() + off);
      off += tp.size();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return nary(std::move(out), ps, [ps](Tape& t, const Tensor2& g) {
      size_t off2 = 0;
      for (Var p : ps) {
        const Tensor2& tp = t.val(p);
        if (t.needs(p)) {
          Tensor2 gp(tp.rows, tp.cols);
          std::copy(g.v.begin() + off2, g.v.begin() + off2 + tp.size(), gp.v.begin());
          t.accumulate(p, gp);
        }
        off2 += tp.size();
      }
    });
  }
  Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
  }

  // Place tensors with equal row counts side by side.
  Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols: empty list");
    int rows = val(parts[0]).rows;
    int cols = 0;
    for (Var p : parts) {
      require(val(p).rows == rows, "concat_cols: row mismatch");
      cols += val(p).cols;
    }
    Tensor2 out(rows, cols);
    int coff = 0;
    for (Var p : parts) {
      const Tensor2& tp = val(p);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < tp.cols; ++c) out(r, coff + c) = tp(r, c);
      coff += tp.cols;
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return nary(std::move(out), ps, [ps](Tape& t, const Tensor2& g) {
      int coff2 = 0;
      for (Var p : ps) {
        const Tensor2& tp = t.val(p);
        if (t.needs(p)) {
          Tensor2 gp(tp.rows, tp.cols);
          for (int r = 0; r < tp.rows; ++r)
            for (int c = 0; c < tp.cols; ++c) gp(r, c) = g(r, coff2 + c);
          t.accumulate(p, gp);
        }
        coff2 += tp.cols;
      }
    });
  }

  Var slice_rows(Var a, int r0, int n) {
    const Tensor2& ta = val(a);
    require(r0 >= 0 && n >= 0 && r0 + n <= ta.rows, "slice_rows: out of range");
    Tensor2 out(n, ta.cols);
    std::copy(ta.v.begin() + static_cast<size_t>(r0) * ta.cols,
              ta.v.begin() + static_cast<size_t>(r0 + n) * ta.cols, out.v.begin());
    return unary(std::move(out), a, [r0](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga(t.val(a2).rows, t.val(a2).cols);
      std::copy(g.v.begin(), g.v.end(), ga.v.begin() + static_cast<size_t>(r0) * ga.cols);
      t.accumulate(a2, ga);
    });
  }

  Var relu(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    return unary(std::move(out), a, [](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga = g;
      const Tensor2& va = t.val(a2);
      for (size_t i = 0; i < ga.size(); ++i)
        if (va.v[i] <= 0.0) ga.v[i] = 0.0;
      t.accumulate(a2, ga);
    });
  }

  Var leaky_relu(Var a, double slope) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = x > 0.0 ? x : slope * x;
    return unary(std::move(out), a, [slope](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga = g;
      const Tensor2& va = t.val(a2);
      for (size_t i = 0; i < ga.size(); ++i)
        if (va.v[i] <= 0.0) ga.v[i] *= slope;
      t.accumulate(a2, ga);
    });
  }

  Var tanh_(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = std::tanh(x);
    return unary_cached(std::move(out), a, [](Tape& t, const Tensor2& g, const Tensor2& y, Var a2) {
      Tensor2 ga = g;
      for (size_t i = 0; i < ga.size(); ++i) ga.v[i] *= 1.0 - y.v[i] * y.v[i];
      t.accumulate(a2, ga);
    });
  }

  Var sigmoid_(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    return unary_cached(std::move(out), a, [](Tape& t, const Tensor2& g, const Tensor2& y, Var a2) {
      Tensor2 ga = g;
      for (size_t i = 0; i < ga.size(); ++i) ga.v[i] *= y.v[i] * (1.0 - y.v[i]);
      t.accumulate(a2, ga);
    });
  }

  // Numerically stable softmax over the rows of a column vector.
  Var softmax(Var a) {
    const Tensor2& ta = val(a);
    require(ta.cols == 1, "softmax: expects a column vector");
    Tensor2 out = ta;
    double mx = out.v[0];
    for (double x : out.v) mx = std::max(mx, x);
    double sum = 0.0;
    for (double& x : out.v) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (double& x : out.v) x /= sum;
    return unary_cached(std::move(out), a, [](Tape& t, const Tensor2& g, const Tensor2& y, Var a2) {
      double dot = 0.0;
      for (size_t i = 0; i < g.size(); ++i) dot += g.v[i] * y.v[i];
      Tensor2 ga = g;
      for (size_t i = 0; i < ga.size(); ++i) ga.v[i] = y.v[i] * (g.v[i] - dot);
      t.accumulate(a2, ga);
    });
  }

  Var sum(Var a) {
    double s = 0.0;
    for (double x : val(a).v) s += x;
    return unary(Tensor2::scalar(s), a, [](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga(t.val(a2).rows, t.val(a2).cols);
      for (double& x : ga.v) x = g.v[0];
      t.accumulate(a2, ga);
    });
  }

  Var mean(Var a) {
    size_t n = val(a).size();
    require(n > 0, "mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
  }

  Var dot(Var a, Var b) {
    const Tensor2 &ta = val(a), &tb = val(b);
    require(ta.same_shape(tb) && ta.cols == 1, "dot: expects equal column vectors");
    double s = 0.0;
    for (size_t i = 0; i < ta.size(); ++i) s += ta.v[i] * tb.v[i];
    return binary(Tensor2::scalar(s), a, b, [](Tape& t, const Tensor2& g, Var a2, Var b2) {
      double gs = g.v[0];
      if (t.needs(a2)) {
        Tensor2 ga = t.val(b2);
        for (double& x : ga.v) x *= gs;
        t.accumulate(a2, ga);
      }
      if (t.needs(b2)) {
        Tensor2 gb = t.val(a2);
        for (double& x : gb.v) x *= gs;
        t.accumulate(b2, gb);
      }
    });
  }

  // Gather 1x1 nodes into a column vector.
  Var stack_scalars(std::span<const Var> xs) {
    require(!xs.empty(), "stack_scalars: empty list");
    Tensor2 out(static_cast<int>(xs.size()), 1);
    for (size_t i = 0; i < xs.size(); ++i) {
      require(val(xs[i]).size() == 1, "stack_scalars: non-scalar element");
      out.v[i] = val(xs[i]).v[0];
    }
    std::vector<Var> ps(xs.begin(), xs.end());
    return nary(std::move(out), ps, [ps](Tape& t, const Tensor2& g) {
      for (size_t i = 0; i < ps.size(); ++i)
        if (t.needs(ps[i])) t.accumulate(ps[i], Tensor2::scalar(g.v[i]));
    });
  }

  // Sum of the elementwise smooth-l1 value: 0.5*x^2 inside |x|<=1, |x|-0.5 outside.
  Var smooth_l1_sum(Var a) {
    double s = 0.0;
    for (double x : val(a).v) {
      double ax = std::abs(x);
      s += ax <= 1.0 ? 0.5 * x * x : ax - 0.5;
    }
    return unary(Tensor2::scalar(s), a, [](Tape& t, const Tensor2& g, Var a2) {
      const Tensor2& va = t.val(a2);
      Tensor2 ga(va.rows, va.cols);
      for (size_t i = 0; i < ga.size(); ++i) {
        double x = va.v[i];
        ga.v[i] = g.v[0] * (std::abs(x) <= 1.0 ? x : (x > 0.0 ? 1.0 : -1.0));
      }
      t.accumulate(a2, ga);
    });
  }

  Var log_(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = std::log(x);
    return unary(std::move(out), a, [](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga = g;
      const Tensor2& va = t.val(a2);
      for (size_t i = 0; i < ga.size(); ++i) ga.v[i] /= va.v[i];
      t.accumulate(a2, ga);
    });
  }

  Var pow_(Var a, double p) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = std::pow(x, p);
    return unary(std::move(out), a, [p](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga = g;
      const Tensor2& va = t.val(a2);
      for (size_t i = 0; i < ga.size(); ++i) ga.v[i] *= p * std::pow(va.v[i], p - 1.0);
      t.accumulate(a2, ga);
    });
  }

  // max(x, c); gradient passes only where x > c.
  Var clamp_min(Var a, double c) {
    Tensor2 out = val(a);
    for (double& x : out.v) x = std::max(x, c);
    return unary(std::move(out), a, [c](Tape& t, const Tensor2& g, Var a2) {
      Tensor2 ga = g;
      const Tensor2& va = t.val(a2);
      for (size_t i = 0; i < ga.size(); ++i)
        if (va.v[i] <= c) ga.v[i] = 0.0;
      t.accumulate(a2, ga);
    });
  }

  Var one_minus(Var a) { return add_scalar(scale(a, -1.0), 1.0); }

  void backward(Var root) {
    require(val(root).size() == 1, "backward: root must be scalar");
    for (Node& n : nodes_)
      if (n.requires_grad) {
        n.grad = Tensor2(n.val.rows, n.val.cols);
      }
    if (!node(root).requires_grad) return;  // loss does not depend on any parameter
    node_mut(root).grad.v[0] = 1.0;
    for (int i = root.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back) n.back(*this, n);
    }
  }

  bool all_finite() const {
    for (const Node& n : nodes_) {
      if (!n.val.all_finite()) return false;
      if (n.grad.size() > 0 && !n.grad.all_finite()) return false;
    }
    return true;
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 val;
    Tensor2 grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Node&)> back;
  };

  std::vector<Node> nodes_;

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  const Node& node(Var a) const {
    require(a.valid() && a.idx < static_cast<int32_t>(nodes_.size()), "invalid Var");
    return nodes_[a.idx];
  }
  Node& node_mut(Var a) { return const_cast<Node&>(node(a)); }

  bool needs(Var a) const { return node(a).requires_grad; }

  void accumulate(Var a, const Tensor2& g) {
    Node& n = node_mut(a);
    if (!n.requires_grad) return;
    for (size_t i = 0; i < g.size(); ++i) n.grad.v[i] += g.v[i];
  }

  Var push(Tensor2 val, bool requires_grad, std::function<void(Tape&, const Node&)> back) {
    Node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
  }

  Var unary(Tensor2 out, Var a, void (*fn)(Tape&, const Tensor2&, Var)) {
    bool rg = needs(a);
    return push(std::move(out), rg,
                rg ? std::function<void(Tape&, const Node&)>(
                         [fn, a](Tape& t, const Node& n) { fn(t, n.grad, a); })
                   : nullptr);
  }

  // Variant whose backward also needs the cached forward output.
  Var unary_cached(Tensor2 out, Var a,
                   void (*fn)(Tape&, const Tensor2&, const Tensor2&, Var)) {
    bool rg = needs(a);
    return push(std::move(out), rg,
                rg ? std::function<void(Tape&, const Node&)>(
                         [fn, a](Tape& t, const Node& n) { fn(t, n.grad, n.val, a); })
                   : nullptr);
  }

  Var binary(Tensor2 out, Var a, Var b, void (*fn)(Tape&, const Tensor2&, Var, Var)) {
    bool rg = needs(a) || needs(b);
    return push(std::move(out), rg,
                rg ? std::function<void(Tape&, const Node&)>(
                         [fn, a, b](Tape& t, const Node& n) { fn(t, n.grad, a, b); })
                   : nullptr);
  }

  Var nary(Tensor2 out, const std::vector<Var>& ps,
           std::function<void(Tape&, const Tensor2&)> fn) {
    bool rg = false;
    for (Var p : ps) rg = rg || needs(p);
    return push(std::move(out), rg,
                rg ? std::function<void(Tape&, const Node&)>(
                         [fn](Tape& t, const Node& n) { fn(t, n.grad); })
                   : nullptr);
  }

  static void matmul_into(Tensor2& out, const Tensor2& a, const Tensor2& b, bool ta, bool tb) {
    int m = ta ? a.cols : a.rows;
    int k = ta ? a.rows : a.cols;
    int n = tb ? b.rows : b.cols;
    if (out.rows != m || out.cols != n) throw std::invalid_argument("matmul_into: bad output shape");
    std::fill(out.v.begin(), out.v.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        double av = ta ? a(p, i) : a(i, p);
        if (av == 0.0) continue;
        const double* brow;
        if (!tb) {
          brow = &b.v[static_cast<size_t>(p) * b.cols];
          double* orow = &out.v[static_cast<size_t>(i) * n];
          for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        } else {
          double* orow = &out.v[static_cast<size_t>(i) * n];
          for (int j = 0; j < n; ++j) orow[j] += av * b(j, p);
        }
      }
    }
  }
};

}  // namespace dagmp
