#include <cmath>
#include <string>

#include "detail.hpp"
#include "sharpseg/ops.hpp"

namespace sharpseg {

using detail::accum;

namespace {

std::size_t resolve_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) fail(ErrorCode::InvalidAttr, "axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(a);
}

struct Rows {
  std::size_t count;   // independent groups
  std::size_t length;  // elements per group
};

// Normalizes each contiguous group of `rows.length` values; gamma/beta are
// indexed by channel_of(group, position).
template <class ChannelOf>
Var normalize(OpKind kind, Var x, Var gamma, Var beta, double eps, Rows rows, ChannelOf channel_of) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidAttr, "eps must be positive");
  const auto& xv = x.value().storage();
  const auto& gv = gamma.value().storage();
  const auto& bv = beta.value().storage();
  std::vector<double> xhat(xv.size());
  std::vector<double> inv(rows.count);
  std::vector<double> out(xv.size());
  const double len = static_cast<double>(rows.length);
  for (std::size_t r = 0; r < rows.count; ++r) {
    const double* p = xv.data() + r * rows.length;
    double mu = 0.0;
    for (std::size_t i = 0; i < rows.length; ++i) mu += p[i];
    mu /= len;
    double var = 0.0;
    for (std::size_t i = 0; i < rows.length; ++i) var += (p[i] - mu) * (p[i] - mu);
    var /= len;
    inv[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < rows.length; ++i) {
      const std::size_t at = r * rows.length + i;
      const std::size_t c = channel_of(r, i);
      xhat[at] = (p[i] - mu) * inv[r];
      out[at] = gv[c] * xhat[at] + bv[c];
    }
  }
  const NodeId ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph().record(
      kind, {ix, ig, ib}, Tensor(x.shape(), std::move(out)),
      [ix, ig, ib, rows, channel_of, xhat = std::move(xhat), inv = std::move(inv)](Graph& g, NodeId self) {
        const auto up = g.upstream(self);
        const auto& gv = g.value(ig).storage();
        auto dx = accum(g, ix);
        auto dg = accum(g, ig);
        auto db = accum(g, ib);
        const double len = static_cast<double>(rows.length);
        for (std::size_t r = 0; r < rows.count; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t i = 0; i < rows.length; ++i) {
            const std::size_t at = r * rows.length + i;
            const std::size_t c = channel_of(r, i);
            const double d = up[at] * gv[c];
            mean_d += d;
            mean_dx += d * xhat[at];
            if (!dg.empty()) dg[c] += up[at] * xhat[at];
            if (!db.empty()) db[c] += up[at];
          }
          if (dx.empty()) continue;
          mean_d /= len;
          mean_dx /= len;
          for (std::size_t i = 0; i < rows.length; ++i) {
            const std::size_t at = r * rows.length + i;
            const double d = up[at] * gv[channel_of(r, i)];
            dx[at] += inv[r] * (d - mean_d - xhat[at] * mean_dx);
          }
        }
      });
}

}  // namespace

Var instance_norm(Var x, Var gamma, Var beta, double eps) {
  const Shape& xs = x.shape();
  if (xs.size() < 3) fail(ErrorCode::ShapeMismatch, "instance_norm expects [N,C,spatial...], got " + shape_str(xs));
  const std::size_t c = xs[1];
  if (gamma.size() != c || beta.size() != c) {
    fail(ErrorCode::ShapeMismatch, "instance_norm affine parameters must have " + std::to_string(c) + " entries");
  }
  const std::size_t spatial = x.size() / (xs[0] * c);
  return normalize(OpKind::InstanceNorm, x, gamma, beta, eps, Rows{xs[0] * c, spatial},
                   [c](std::size_t r, std::size_t) { return r % c; });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Shape& xs = x.shape();
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "layer_norm of a scalar");
  const std::size_t c = xs.back();
  if (gamma.size() != c || beta.size() != c) {
    fail(ErrorCode::ShapeMismatch, "layer_norm affine parameters must have " + std::to_string(c) + " entries");
  }
  return normalize(OpKind::LayerNorm, x, gamma, beta, eps, Rows{x.size() / c, c},
                   [](std::size_t, std::size_t i) { return i; });
}

Var softmax(Var x, int axis) {
  const Shape& xs = x.shape();
  const std::size_t ax = resolve_axis(axis, xs.size());
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= xs[d];
  for (std::size_t d = ax + 1; d < xs.size(); ++d) inner *= xs[d];
  const std::size_t len = xs[ax];
  const auto& xv = x.value().storage();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double mx = xv[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  const NodeId ix = x.id();
  return x.graph().record(OpKind::Softmax, {ix}, Tensor(xs, std::move(out)),
                          [ix, outer, inner, len](Graph& g, NodeId self) {
                            auto dx = accum(g, ix);
                            if (dx.empty()) return;
                            const auto up = g.upstream(self);
                            const auto& y = g.value(self).storage();
                            for (std::size_t o = 0; o < outer; ++o) {
                              for (std::size_t i = 0; i < inner; ++i) {
                                const std::size_t base = o * len * inner + i;
                                double dot = 0.0;
                                for (std::size_t k = 0; k < len; ++k) {
                                  dot += up[base + k * inner] * y[base + k * inner];
                                }
                                for (std::size_t k = 0; k < len; ++k) {
                                  const std::size_t at = base + k * inner;
                                  dx[at] += y[at] * (up[at] - dot);
                                }
                              }
                            }
                          });
}

}  // namespace sharpseg
