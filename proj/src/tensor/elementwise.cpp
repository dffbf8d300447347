#include <cmath>

#include "detail.hpp"
#include "sharpseg/ops.hpp"

namespace sharpseg {

using detail::accum;

namespace {

// Shape of the broadcast result, or ShapeMismatch.
Shape broadcast_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1) return a.shape();
  if (a.size() == 1) return b.shape();
  fail(ErrorCode::ShapeMismatch,
       std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class F, class DA, class DB>
Var binary(OpKind kind, Var a, Var b, F f, DA dfa, DB dfb) {
  Graph& g = a.graph();
  if (&b.graph() != &g) fail(ErrorCode::DetachedNode, "operands belong to different graphs");
  Shape shape = broadcast_shape(a, b, op_name(kind));
  const std::size_t n = numel(shape);
  const bool ba = a.size() == 1 && n != 1;
  const bool bb = b.size() == 1 && n != 1 && !ba;
  const auto& av = a.value().storage();
  const auto& bv = b.value().storage();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ba ? 0 : i], bv[bb ? 0 : i]);
  const NodeId ia = a.id(), ib = b.id();
  return g.record(kind, {ia, ib}, Tensor(std::move(shape), std::move(out)),
                  [ia, ib, ba, bb, n, dfa, dfb](Graph& gr, NodeId self) {
                    const auto up = gr.upstream(self);
                    const auto& x = gr.value(ia).storage();
                    const auto& y = gr.value(ib).storage();
                    const auto& z = gr.value(self).storage();
                    if (auto da = accum(gr, ia); !da.empty()) {
                      for (std::size_t i = 0; i < n; ++i) {
                        da[ba ? 0 : i] += up[i] * dfa(x[ba ? 0 : i], y[bb ? 0 : i], z[i]);
                      }
                    }
                    if (auto db = accum(gr, ib); !db.empty()) {
                      for (std::size_t i = 0; i < n; ++i) {
                        db[bb ? 0 : i] += up[i] * dfb(x[ba ? 0 : i], y[bb ? 0 : i], z[i]);
                      }
                    }
                  });
}

// f(x) -> y; df(x, y) -> dy/dx.
template <class F, class DF>
Var unary(OpKind kind, Var x, F f, DF df) {
  Graph& g = x.graph();
  const auto& xv = x.value().storage();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const NodeId ix = x.id();
  return g.record(kind, {ix}, Tensor(x.shape(), std::move(out)), [ix, df](Graph& gr, NodeId self) {
    auto dx = accum(gr, ix);
    if (dx.empty()) return;
    const auto up = gr.upstream(self);
    const auto& xs = gr.value(ix).storage();
    const auto& ys = gr.value(self).storage();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i] * df(xs[i], ys[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      OpKind::Add, a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      OpKind::Sub, a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      OpKind::Mul, a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  for (double y : b.value().data()) {
    if (y == 0.0) fail(ErrorCode::NumericDomain, "division by zero");
  }
  return binary(
      OpKind::Div, a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Var add_scalar(Var a, double c) { return add(a, a.graph().constant(Tensor::scalar(c))); }

Var mul_scalar(Var a, double c) { return mul(a, a.graph().constant(Tensor::scalar(c))); }

Var exp(Var x) {
  return unary(
      OpKind::Exp, x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) fail(ErrorCode::NumericDomain, "log of non-positive value " + std::to_string(v));
  }
  return unary(
      OpKind::Log, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var neg(Var x) {
  return unary(
      OpKind::Neg, x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var pow(Var x, double exponent) {
  if (!std::isfinite(exponent)) fail(ErrorCode::InvalidAttr, "non-finite exponent");
  if (exponent != std::floor(exponent)) {
    for (double v : x.value().data()) {
      if (v < 0.0) fail(ErrorCode::NumericDomain, "fractional power of negative value");
    }
  }
  return unary(
      OpKind::Pow, x, [exponent](double v) { return std::pow(v, exponent); },
      [exponent](double v, double) {
        if (exponent == 0.0) return 0.0;
        if (exponent == 1.0) return 1.0;
        return exponent * std::pow(v, exponent - 1.0);
      });
}

Var sigmoid(Var x) {
  return unary(
      OpKind::Sigmoid, x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var x) {
  return unary(
      OpKind::Softplus, x,
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return stable_sigmoid(v); });
}

Var silu(Var x) { return mul(x, sigmoid(x)); }

Var leaky_relu(Var x, double slope) {
  if (!std::isfinite(slope)) fail(ErrorCode::InvalidAttr, "non-finite leaky slope");
  return unary(
      OpKind::LeakyRelu, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) fail(ErrorCode::InvalidAttr, "clamp bounds out of order");
  return unary(
      OpKind::Clamp, x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

}  // namespace sharpseg
