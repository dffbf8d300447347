#include <string>

#include "detail.hpp"
#include "sharpseg/ops.hpp"

namespace sharpseg {

using detail::accum;
using detail::Geometry;

Var matmul(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    fail(ErrorCode::ShapeMismatch, "matmul " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  detail::gemm(false, false, m, n, k, a.value().data().data(), b.value().data().data(),
               out.data().data(), false);
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(OpKind::MatMul, {ia, ib}, std::move(out),
                          [ia, ib, m, n, k](Graph& g, NodeId self) {
                            const double* up = g.upstream(self).data();
                            if (auto da = accum(g, ia); !da.empty()) {
                              detail::gemm(false, true, m, k, n, up, g.value(ib).data().data(), da.data(), true);
                            }
                            if (auto db = accum(g, ib); !db.empty()) {
                              detail::gemm(true, false, k, n, m, g.value(ia).data().data(), up, db.data(), true);
                            }
                          });
}

namespace {

std::vector<std::size_t> expand(const std::vector<std::size_t>& v, std::size_t rank, const char* what) {
  if (v.size() == rank) return v;
  if (v.size() == 1) return std::vector<std::size_t>(rank, v[0]);
  fail(ErrorCode::InvalidAttr, std::string(what) + " needs 1 or " + std::to_string(rank) + " entries");
}

struct WindowSetup {
  Geometry geo;
  std::size_t batch = 0;
  std::size_t out_channels = 0;
  Shape out_shape;
};

// Shared validation for conv (transposed == false) and transposed conv.
WindowSetup window_setup(const Var& x, const Var& w, const ConvAttrs& attrs, bool transposed) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const char* name = transposed ? "transposed_conv" : "conv";
  if (xs.size() < 3 || xs.size() > 5) {
    fail(ErrorCode::ShapeMismatch, std::string(name) + " input must be [N,C,s...] with 1-3 spatial axes, got " +
                                       shape_str(xs));
  }
  const std::size_t rank = xs.size() - 2;
  if (ws.size() != rank + 2) {
    fail(ErrorCode::ShapeMismatch, std::string(name) + " weight " + shape_str(ws) + " vs input " + shape_str(xs));
  }
  const auto stride = expand(attrs.stride, rank, "stride");
  const auto pad = expand(attrs.padding, rank, "padding");
  for (std::size_t s : stride) {
    if (s < 1) fail(ErrorCode::InvalidAttr, "stride must be >= 1");
  }
  WindowSetup ws_out;
  Geometry& geo = ws_out.geo;
  ws_out.batch = xs[0];
  const std::size_t off = 3 - rank;
  if (!transposed) {
    if (ws[1] != xs[1]) {
      fail(ErrorCode::ShapeMismatch, "conv weight in-channels " + std::to_string(ws[1]) + " vs input " +
                                         std::to_string(xs[1]));
    }
    geo.channels = xs[1];
    ws_out.out_channels = ws[0];
    ws_out.out_shape = {xs[0], ws[0]};
    for (std::size_t d = 0; d < rank; ++d) {
      const std::size_t in = xs[2 + d], k = ws[2 + d];
      if (in + 2 * pad[d] < k) fail(ErrorCode::ShapeMismatch, "conv kernel larger than padded input");
      const std::size_t out = (in + 2 * pad[d] - k) / stride[d] + 1;
      geo.big[off + d] = in;
      geo.small[off + d] = out;
      geo.kernel[off + d] = k;
      geo.stride[off + d] = stride[d];
      geo.pad[off + d] = pad[d];
      ws_out.out_shape.push_back(out);
    }
  } else {
    if (ws[0] != xs[1]) {
      fail(ErrorCode::ShapeMismatch, "transposed_conv weight in-channels " + std::to_string(ws[0]) +
                                         " vs input " + std::to_string(xs[1]));
    }
    geo.channels = ws[1];
    ws_out.out_channels = ws[1];
    ws_out.out_shape = {xs[0], ws[1]};
    for (std::size_t d = 0; d < rank; ++d) {
      const std::size_t in = xs[2 + d], k = ws[2 + d];
      const std::size_t full = (in - 1) * stride[d] + k;
      if (full <= 2 * pad[d]) fail(ErrorCode::InvalidAttr, "transposed_conv padding consumes the output");
      const std::size_t out = full - 2 * pad[d];
      geo.big[off + d] = out;
      geo.small[off + d] = in;
      geo.kernel[off + d] = k;
      geo.stride[off + d] = stride[d];
      geo.pad[off + d] = pad[d];
      ws_out.out_shape.push_back(out);
    }
  }
  return ws_out;
}

}  // namespace

Var conv(Var x, Var weight, const ConvAttrs& attrs) {
  WindowSetup setup = window_setup(x, weight, attrs, false);
  const Geometry geo = setup.geo;
  const std::size_t n_batch = setup.batch, cout = setup.out_channels;
  const std::size_t rows = geo.channels * geo.kernel_volume();
  const std::size_t len = geo.small_volume();
  const std::size_t in_vol = geo.channels * geo.big_volume();
  Tensor out(setup.out_shape);
  std::vector<double> col(rows * len);
  const double* xd = x.value().data().data();
  const double* wd = weight.value().data().data();
  for (std::size_t n = 0; n < n_batch; ++n) {
    detail::im2col(xd + n * in_vol, geo, col.data());
    detail::gemm(false, false, cout, len, rows, wd, col.data(), out.data().data() + n * cout * len, false);
  }
  const NodeId ix = x.id(), iw = weight.id();
  return x.graph().record(
      OpKind::Conv, {ix, iw}, std::move(out),
      [ix, iw, geo, n_batch, cout, rows, len, in_vol](Graph& g, NodeId self) {
        const double* up = g.upstream(self).data();
        auto dx = accum(g, ix);
        auto dw = accum(g, iw);
        std::vector<double> col(rows * len);
        const double* xd = g.value(ix).data().data();
        const double* wd = g.value(iw).data().data();
        for (std::size_t n = 0; n < n_batch; ++n) {
          const double* up_n = up + n * cout * len;
          if (!dw.empty()) {
            detail::im2col(xd + n * in_vol, geo, col.data());
            detail::gemm(false, true, cout, rows, len, up_n, col.data(), dw.data(), true);
          }
          if (!dx.empty()) {
            detail::gemm(true, false, rows, len, cout, wd, up_n, col.data(), false);
            detail::col2im(col.data(), geo, dx.data() + n * in_vol);
          }
        }
      });
}

Var transposed_conv(Var x, Var weight, const ConvAttrs& attrs) {
  WindowSetup setup = window_setup(x, weight, attrs, true);
  const Geometry geo = setup.geo;
  const std::size_t n_batch = setup.batch;
  const std::size_t cin = x.shape()[1];
  const std::size_t rows = geo.channels * geo.kernel_volume();  // Cout * K
  const std::size_t len = geo.small_volume();                   // input volume
  const std::size_t out_vol = geo.channels * geo.big_volume();
  Tensor out(setup.out_shape);
  std::vector<double> col(rows * len);
  const double* xd = x.value().data().data();
  const double* wd = weight.value().data().data();
  for (std::size_t n = 0; n < n_batch; ++n) {
    detail::gemm(true, false, rows, len, cin, wd, xd + n * cin * len, col.data(), false);
    detail::col2im(col.data(), geo, out.data().data() + n * out_vol);
  }
  const NodeId ix = x.id(), iw = weight.id();
  return x.graph().record(
      OpKind::TransposedConv, {ix, iw}, std::move(out),
      [ix, iw, geo, n_batch, cin, rows, len, out_vol](Graph& g, NodeId self) {
        const double* up = g.upstream(self).data();
        auto dx = accum(g, ix);
        auto dw = accum(g, iw);
        std::vector<double> col(rows * len);
        const double* xd = g.value(ix).data().data();
        const double* wd = g.value(iw).data().data();
        for (std::size_t n = 0; n < n_batch; ++n) {
          detail::im2col(up + n * out_vol, geo, col.data());
          if (!dx.empty()) detail::gemm(false, false, cin, len, rows, wd, col.data(), dx.data() + n * cin * len, true);
          if (!dw.empty()) detail::gemm(false, true, cin, rows, len, xd + n * cin * len, col.data(), dw.data(), true);
        }
      });
}

Var bias_add(Var x, Var bias, std::size_t axis) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) fail(ErrorCode::InvalidAttr, "bias axis out of range");
  if (bias.size() != xs[axis]) {
    fail(ErrorCode::ShapeMismatch, "bias " + shape_str(bias.shape()) + " for axis " + std::to_string(axis) +
                                       " of " + shape_str(xs));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
  for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  const std::size_t c = xs[axis];
  Tensor out = x.value();
  out.set_requires_grad(false);
  const auto& b = bias.value().storage();
  auto o = out.data();
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double* p = o.data() + (i * c + j) * inner;
      for (std::size_t k = 0; k < inner; ++k) p[k] += b[j];
    }
  }
  const NodeId ix = x.id(), ib = bias.id();
  return x.graph().record(OpKind::BiasAdd, {ix, ib}, std::move(out),
                          [ix, ib, outer, c, inner](Graph& g, NodeId self) {
                            const auto up = g.upstream(self);
                            if (auto dx = accum(g, ix); !dx.empty()) {
                              for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i];
                            }
                            if (auto db = accum(g, ib); !db.empty()) {
                              for (std::size_t i = 0; i < outer; ++i) {
                                for (std::size_t j = 0; j < c; ++j) {
                                  const double* p = up.data() + (i * c + j) * inner;
                                  double s = 0.0;
                                  for (std::size_t k = 0; k < inner; ++k) s += p[k];
                                  db[j] += s;
                                }
                              }
                            }
                          });
}

}  // namespace sharpseg
