// neural/ops.cc

#include "adlmvdr/neural/ops.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace adlmvdr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::vector<size_t> ContiguousStrides(const Shape &s) {
  std::vector<size_t> st(s.size(), 1);
  for (size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

struct Bcast {
  Shape out;
  std::vector<size_t> sa, sb;
  bool same = false;
};

Bcast MakeBcast(const Shape &a, const Shape &b) {
  Bcast bc;
  bc.same = a == b;
  const size_t r = std::max(a.size(), b.size());
  bc.out.assign(r, 1);
  bc.sa.assign(r, 0);
  bc.sb.assign(r, 0);
  const auto sta = ContiguousStrides(a), stb = ContiguousStrides(b);
  for (size_t i = 0; i < r; ++i) {
    const size_t ax = r - 1 - i;
    const bool ha = i < a.size(), hb = i < b.size();
    const size_t da = ha ? a[a.size() - 1 - i] : 1, db = hb ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1)
      throw ShapeError("cannot broadcast " + ShapeString(a) + " with " + ShapeString(b));
    bc.out[ax] = std::max(da, db);
    if (da == 0 || db == 0) bc.out[ax] = 0;
    bc.sa[ax] = (ha && da != 1) ? sta[a.size() - 1 - i] : 0;
    bc.sb[ax] = (hb && db != 1) ? stb[b.size() - 1 - i] : 0;
  }
  return bc;
}

// f(out_index, a_index, b_index) over every output element.
template <class F>
void ForEach(const Bcast &bc, F f) {
  const size_t total = NumElements(bc.out);
  if (total == 0) return;
  if (bc.same) {
    for (size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const size_t r = bc.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const size_t inner = bc.out[r - 1], sa_in = bc.sa[r - 1], sb_in = bc.sb[r - 1];
  std::vector<size_t> idx(r, 0);
  size_t ia = 0, ib = 0;
  for (size_t o = 0; o < total; o += inner) {
    for (size_t k = 0; k < inner; ++k) f(o + k, ia + k * sa_in, ib + k * sb_in);
    for (size_t ax = r - 1; ax-- > 0;) {
      ++idx[ax];
      ia += bc.sa[ax];
      ib += bc.sb[ax];
      if (idx[ax] < bc.out[ax]) break;
      ia -= bc.sa[ax] * bc.out[ax];
      ib -= bc.sb[ax] * bc.out[ax];
      idx[ax] = 0;
    }
  }
}

template <class F, class GA, class GB>
Tensor Binary(const Tensor &a, const Tensor &b, F f, GA ga, GB gb) {
  Bcast bc = MakeBcast(a.shape(), b.shape());
  std::vector<double> out(NumElements(bc.out));
  const double *pa = a.data(), *pb = b.data();
  ForEach(bc, [&](size_t o, size_t ia, size_t ib) { out[o] = f(pa[ia], pb[ib]); });
  Shape shape = bc.out;
  return MakeResult(std::move(shape), std::move(out), {a, b}, [&]() -> BackwardFn {
    Node *na = a.node(), *nb = b.node();
    return [bc = std::move(bc), na, nb, ga, gb](const std::vector<double> &g) {
      const double *xa = na->value.data(), *xb = nb->value.data();
      if (na->requires_grad) {
        double *d = na->Grad().data();
        ForEach(bc, [&](size_t o, size_t ia, size_t ib) { d[ia] += ga(xa[ia], xb[ib], g[o]); });
      }
      if (nb->requires_grad) {
        double *d = nb->Grad().data();
        ForEach(bc, [&](size_t o, size_t ia, size_t ib) { d[ib] += gb(xa[ia], xb[ib], g[o]); });
      }
    };
  });
}

// df(x, y, g) with y the forward output.
template <class F, class DF>
Tensor Unary(const Tensor &x, F f, DF df) {
  const auto &v = x.value();
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return MakeResult(x.shape(), std::move(out), {x}, [&]() -> BackwardFn {
    Node *nx = x.node();
    // The output is recomputed rather than captured.
    return [nx, f, df](const std::vector<double> &g) {
      auto &d = nx->Grad();
      const auto &xv = nx->value;
      for (size_t i = 0; i < xv.size(); ++i) d[i] += df(xv[i], f(xv[i]), g[i]);
    };
  });
}

// outer x n x inner decomposition around one axis.
void SplitAxis(const Shape &s, size_t axis, size_t &outer, size_t &n, size_t &inner) {
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + ShapeString(s));
  outer = 1;
  inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= s[i];
  n = s[axis];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace

Tensor Add(const Tensor &a, const Tensor &b) {
  return Binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double, double g) { return g; },
      [](double, double, double g) { return g; });
}

Tensor Sub(const Tensor &a, const Tensor &b) {
  return Binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double, double g) { return g; },
      [](double, double, double g) { return -g; });
}

Tensor Mul(const Tensor &a, const Tensor &b) {
  return Binary(
      a, b, [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

Tensor Div(const Tensor &a, const Tensor &b) {
  return Binary(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y, double g) { return g / y; },
      [](double x, double y, double g) { return -g * x / (y * y); });
}

Tensor Neg(const Tensor &x) { return Scale(x, -1.0); }

Tensor Scale(const Tensor &x, double c) {
  return Unary(
      x, [c](double v) { return c * v; }, [c](double, double, double g) { return c * g; });
}

Tensor AddScalar(const Tensor &x, double c) {
  return Unary(
      x, [c](double v) { return v + c; }, [](double, double, double g) { return g; });
}

Tensor Tanh(const Tensor &x) {
  return Unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y, double g) { return g * (1.0 - y * y); });
}

Tensor Sigmoid(const Tensor &x) {
  return Unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor Relu(const Tensor &x) {
  return Unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double, double g) { return v > 0.0 ? g : 0.0; });
}

Tensor Exp(const Tensor &x) {
  return Unary(
      x, [](double v) { return std::exp(v); }, [](double, double y, double g) { return g * y; });
}

Tensor Log(const Tensor &x) {
  return Unary(
      x, [](double v) { return std::log(v); }, [](double v, double, double g) { return g / v; });
}

Tensor Sqrt(const Tensor &x) {
  return Unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y, double g) { return g * 0.5 / y; });
}

Tensor Square(const Tensor &x) {
  return Unary(
      x, [](double v) { return v * v; }, [](double v, double, double g) { return 2.0 * v * g; });
}

Tensor ClampMin(const Tensor &x, double lo) {
  return Unary(
      x, [lo](double v) { return v < lo ? lo : v; },
      [lo](double v, double, double g) { return v < lo ? 0.0 : g; });
}

Tensor Clamp(const Tensor &x, double lo, double hi) {
  return Unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double, double g) { return (v < lo || v > hi) ? 0.0 : g; });
}

Tensor PRelu(const Tensor &x, const Tensor &alpha) {
  return Binary(
      x, alpha, [](double v, double a) { return v > 0.0 ? v : a * v; },
      [](double v, double a, double g) { return v > 0.0 ? g : a * g; },
      [](double v, double, double g) { return v > 0.0 ? 0.0 : v * g; });
}

Tensor Sum(const Tensor &x, size_t axis, bool keepdim) {
  size_t outer, n, inner;
  SplitAxis(x.shape(), axis, outer, n, inner);
  std::vector<double> out(outer * inner, 0.0);
  const double *p = x.data();
  for (size_t o = 0; o < outer; ++o)
    for (size_t k = 0; k < n; ++k) {
      const double *src = p + (o * n + k) * inner;
      double *dst = out.data() + o * inner;
      for (size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  Shape shape = x.shape();
  if (keepdim)
    shape[axis] = 1;
  else
    shape.erase(shape.begin() + static_cast<long>(axis));
  return MakeResult(std::move(shape), std::move(out), {x}, [&]() -> BackwardFn {
    Node *nx = x.node();
    return [nx, outer, n, inner](const std::vector<double> &g) {
      double *d = nx->Grad().data();
      for (size_t o = 0; o < outer; ++o)
        for (size_t k = 0; k < n; ++k) {
          double *dst = d + (o * n + k) * inner;
          const double *src = g.data() + o * inner;
          for (size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    };
  });
}

Tensor Mean(const Tensor &x, size_t axis, bool keepdim) {
  const double n = static_cast<double>(x.shape().at(axis));
  return Scale(Sum(x, axis, keepdim), 1.0 / n);
}

Tensor SumAll(const Tensor &x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  return MakeResult({}, {s}, {x}, [&]() -> BackwardFn {
    Node *nx = x.node();
    return [nx](const std::vector<double> &g) {
      for (double &d : nx->Grad()) d += g[0];
    };
  });
}

Tensor MeanAll(const Tensor &x) { return Scale(SumAll(x), 1.0 / static_cast<double>(x.size())); }

Tensor Reshape(const Tensor &x, Shape shape) {
  if (NumElements(shape) != x.size())
    throw ShapeError("reshape " + ShapeString(x.shape()) + " to " + ShapeString(shape));
  return MakeResult(std::move(shape), x.value(), {x}, [&]() -> BackwardFn {
    Node *nx = x.node();
    return [nx](const std::vector<double> &g) {
      auto &d = nx->Grad();
      for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    };
  });
}

namespace {

// Input offset for each output element of a permutation.
std::vector<size_t> PermuteMap(const Shape &in, const std::vector<size_t> &perm, Shape &out) {
  const size_t r = in.size();
  if (perm.size() != r) throw ShapeError("permute: rank mismatch");
  std::vector<bool> used(r, false);
  for (size_t p : perm) {
    if (p >= r || used[p]) throw ShapeError("permute: invalid axis order");
    used[p] = true;
  }
  const auto st = ContiguousStrides(in);
  out.resize(r);
  std::vector<size_t> pst(r);
  for (size_t i = 0; i < r; ++i) {
    out[i] = in[perm[i]];
    pst[i] = st[perm[i]];
  }
  const size_t total = NumElements(in);
  std::vector<size_t> map(total);
  std::vector<size_t> idx(r, 0);
  size_t off = 0;
  for (size_t o = 0; o < total; ++o) {
    map[o] = off;
    for (size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      off += pst[ax];
      if (idx[ax] < out[ax]) break;
      off -= pst[ax] * out[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor Permute(const Tensor &x, const std::vector<size_t> &perm) {
  Shape shape;
  auto map = PermuteMap(x.shape(), perm, shape);
  std::vector<double> out(map.size());
  const double *p = x.data();
  for (size_t o = 0; o < map.size(); ++o) out[o] = p[map[o]];
  return MakeResult(std::move(shape), std::move(out), {x}, [&]() -> BackwardFn {
    Node *nx = x.node();
    return [nx, map = std::move(map)](const std::vector<double> &g) {
      double *d = nx->Grad().data();
      for (size_t o = 0; o < map.size(); ++o) d[map[o]] += g[o];
    };
  });
}

Tensor Transpose(const Tensor &x) {
  if (x.rank() != 2) throw ShapeError("transpose needs a 2-d tensor, got " + ShapeString(x.shape()));
  return Permute(x, {1, 0});
}

Tensor Slice(const Tensor &x, size_t axis, size_t start, size_t len) {
  size_t outer, n, inner;
  SplitAxis(x.shape(), axis, outer, n, inner);
  if (start + len > n)
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") beyond axis of size " + std::to_string(n));
  std::vector<double> out(outer * len * inner);
  const double *p = x.data();
  for (size_t o = 0; o < outer; ++o)
    std::copy_n(p + (o * n + start) * inner, len * inner, out.data() + o * len * inner);
  Shape shape = x.shape();
  shape[axis] = len;
  return MakeResult(std::move(shape), std::move(out), {x}, [&]() -> BackwardFn {
    Node *nx = x.node();
    return [nx, outer, n, inner, start, len](const std::vector<double> &g) {
      double *d = nx->Grad().data();
      for (size_t o = 0; o < outer; ++o) {
        double *dst = d + (o * n + start) * inner;
        const double *src = g.data() + o * len * inner;
        for (size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
      }
    };
  });
}

Tensor Concat(const std::vector<Tensor> &xs, size_t axis) {
  if (xs.empty()) throw ShapeError("concat of nothing");
  Shape shape = xs[0].shape();
  if (axis >= shape.size()) throw ShapeError("concat axis out of range");
  size_t total_n = 0;
  for (const auto &x : xs) {
    Shape s = x.shape();
    if (s.size() != shape.size()) throw ShapeError("concat rank mismatch");
    s[axis] = shape[axis];
    if (s != shape)
      throw ShapeError("concat shape mismatch: " + ShapeString(x.shape()) + " vs " +
                       ShapeString(xs[0].shape()));
    total_n += x.dim(axis);
  }
  size_t outer, n0, inner;
  SplitAxis(shape, axis, outer, n0, inner);
  shape[axis] = total_n;
  std::vector<double> out(outer * total_n * inner);
  std::vector<size_t> offs;
  size_t off = 0;
  for (const auto &x : xs) {
    const size_t n = x.dim(axis);
    for (size_t o = 0; o < outer; ++o)
      std::copy_n(x.data() + o * n * inner, n * inner, out.data() + (o * total_n + off) * inner);
    offs.push_back(off);
    off += n;
  }
  return MakeResult(std::move(shape), std::move(out), xs, [&]() -> BackwardFn {
    std::vector<Node *> nodes;
    for (const auto &x : xs) nodes.push_back(x.node());
    return [nodes, offs, outer, total_n, inner, axis](const std::vector<double> &g) {
      for (size_t k = 0; k < nodes.size(); ++k) {
        Node *nx = nodes[k];
        if (!nx->requires_grad) continue;
        const size_t n = nx->shape[axis];
        double *d = nx->Grad().data();
        for (size_t o = 0; o < outer; ++o) {
          const double *src = g.data() + (o * total_n + offs[k]) * inner;
          double *dst = d + o * n * inner;
          for (size_t i = 0; i < n * inner; ++i) dst[i] += src[i];
        }
      }
    };
  });
}

Tensor MatMul(const Tensor &a, const Tensor &b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul " + ShapeString(a.shape()) + " x " + ShapeString(b.shape()));
  const long n = static_cast<long>(a.dim(0)), k = static_cast<long>(a.dim(1)),
             m = static_cast<long>(b.dim(1));
  std::vector<double> out(static_cast<size_t>(n * m));
  Map(out.data(), n, m).noalias() = MapC(a.data(), n, k) * MapC(b.data(), k, m);
  return MakeResult({a.dim(0), b.dim(1)}, std::move(out), {a, b}, [&]() -> BackwardFn {
    Node *na = a.node(), *nb = b.node();
    return [na, nb, n, k, m](const std::vector<double> &g) {
      const MapC G(g.data(), n, m);
      if (na->requires_grad)
        Map(na->Grad().data(), n, k).noalias() += G * MapC(nb->value.data(), k, m).transpose();
      if (nb->requires_grad)
        Map(nb->Grad().data(), k, m).noalias() += MapC(na->value.data(), n, k).transpose() * G;
    };
  });
}

Tensor Linear(const Tensor &x, const Tensor &w, const Tensor &b) {
  if (w.rank() != 2 || x.rank() < 1 || x.shape().back() != w.dim(0))
    throw ShapeError("linear " + ShapeString(x.shape()) + " x " + ShapeString(w.shape()));
  const size_t in = w.dim(0), rows = x.size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = w.dim(1);
  Tensor y = MatMul(Reshape(x, {rows, in}), w);
  return Reshape(Add(y, b), std::move(out_shape));
}

Tensor Conv1d(const Tensor &x, const Tensor &w, const Tensor &b, size_t dilation) {
  if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(1) || b.size() != w.dim(2))
    throw ShapeError("conv1d input " + ShapeString(x.shape()) + ", weight " +
                     ShapeString(w.shape()) + ", bias " + ShapeString(b.shape()));
  const long t_n = static_cast<long>(x.dim(0)), cin = static_cast<long>(x.dim(1)),
             cout = static_cast<long>(w.dim(2)), taps = static_cast<long>(w.dim(0));
  const long d = static_cast<long>(dilation);
  std::vector<double> out(static_cast<size_t>(t_n * cout));
  Map Y(out.data(), t_n, cout);
  Y.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(b.data(), cout);
  const MapC X(x.data(), t_n, cin);
  for (long k = 0; k < taps; ++k) {
    const long s = (taps - 1 - k) * d;
    if (s >= t_n) continue;
    const MapC Wk(w.data() + k * cin * cout, cin, cout);
    Y.bottomRows(t_n - s).noalias() += X.topRows(t_n - s) * Wk;
  }
  return MakeResult({x.dim(0), w.dim(2)}, std::move(out), {x, w, b}, [&]() -> BackwardFn {
    Node *nx = x.node(), *nw = w.node(), *nb = b.node();
    return [=](const std::vector<double> &g) {
      const MapC G(g.data(), t_n, cout);
      if (nb->requires_grad)
        Eigen::Map<Eigen::RowVectorXd>(nb->Grad().data(), cout) += G.colwise().sum();
      const MapC Xv(nx->value.data(), t_n, cin);
      for (long k = 0; k < taps; ++k) {
        const long s = (taps - 1 - k) * d;
        if (s >= t_n) continue;
        if (nw->requires_grad)
          Map(nw->Grad().data() + k * cin * cout, cin, cout).noalias() +=
              Xv.topRows(t_n - s).transpose() * G.bottomRows(t_n - s);
        if (nx->requires_grad)
          Map(nx->Grad().data(), t_n, cin).topRows(t_n - s).noalias() +=
              G.bottomRows(t_n - s) * MapC(nw->value.data() + k * cin * cout, cin, cout).transpose();
      }
    };
  });
}

Tensor LayerNorm(const Tensor &x, const Tensor &gamma, const Tensor &beta, double eps) {
  const size_t c = x.shape().empty() ? 1 : x.shape().back();
  if (gamma.size() != c || beta.size() != c)
    throw ShapeError("layer_norm over " + std::to_string(c) + " channels, gamma " +
                     ShapeString(gamma.shape()));
  const size_t rows = x.size() / c;
  std::vector<double> out(x.size()), xhat(x.size()), rstd(rows);
  const double *p = x.data(), *gm = gamma.data(), *bt = beta.data();
  for (size_t r = 0; r < rows; ++r) {
    const double *row = p + r * c;
    double mu = 0.0;
    for (size_t i = 0; i < c; ++i) mu += row[i];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (size_t i = 0; i < c; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(c);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (size_t i = 0; i < c; ++i) {
      xhat[r * c + i] = (row[i] - mu) * rstd[r];
      out[r * c + i] = gm[i] * xhat[r * c + i] + bt[i];
    }
  }
  return MakeResult(x.shape(), std::move(out), {x, gamma, beta}, [&]() -> BackwardFn {
    Node *nx = x.node(), *ng = gamma.node(), *nb = beta.node();
    return [nx, ng, nb, c, rows, xhat = std::move(xhat),
            rstd = std::move(rstd)](const std::vector<double> &g) {
      const double *gm = ng->value.data();
      if (ng->requires_grad || nb->requires_grad) {
        auto &dg = ng->Grad();
        auto &db = nb->Grad();
        for (size_t r = 0; r < rows; ++r)
          for (size_t i = 0; i < c; ++i) {
            dg[i] += g[r * c + i] * xhat[r * c + i];
            db[i] += g[r * c + i];
          }
      }
      if (!nx->requires_grad) return;
      auto &dx = nx->Grad();
      const double inv_c = 1.0 / static_cast<double>(c);
      for (size_t r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (size_t i = 0; i < c; ++i) {
          const double dxh = g[r * c + i] * gm[i];
          m1 += dxh;
          m2 += dxh * xhat[r * c + i];
        }
        m1 *= inv_c;
        m2 *= inv_c;
        for (size_t i = 0; i < c; ++i) {
          const double dxh = g[r * c + i] * gm[i];
          dx[r * c + i] += rstd[r] * (dxh - m1 - xhat[r * c + i] * m2);
        }
      }
    };
  });
}

}  // namespace adlmvdr::nn
