#include <algorithm>
#include <numeric>
#include <string>

#include "detail.hpp"
#include "sharpseg/ops.hpp"

namespace sharpseg {

using detail::accum;

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const NodeId ix = x.id();
  return x.graph().record(OpKind::Sum, {ix}, Tensor::scalar(s), [ix](Graph& g, NodeId self) {
    auto dx = accum(g, ix);
    const double up = g.upstream(self)[0];
    for (double& d : dx) d += up;
  });
}

Var mean(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const double n = static_cast<double>(x.size());
  const NodeId ix = x.id();
  return x.graph().record(OpKind::Mean, {ix}, Tensor::scalar(s / n), [ix, n](Graph& g, NodeId self) {
    auto dx = accum(g, ix);
    const double up = g.upstream(self)[0] / n;
    for (double& d : dx) d += up;
  });
}

Var sum_axis(Var x, std::size_t axis) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) fail(ErrorCode::InvalidAttr, "sum_axis axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
  for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  const std::size_t len = xs[axis];
  Shape out_shape = xs;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  const auto& xv = x.value().storage();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < len; ++k) {
      const double* src = xv.data() + (o * len + k) * inner;
      double* dst = out.data().data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  const NodeId ix = x.id();
  return x.graph().record(OpKind::SumAxis, {ix}, std::move(out), [ix, outer, inner, len](Graph& g, NodeId self) {
    auto dx = accum(g, ix);
    if (dx.empty()) return;
    const auto up = g.upstream(self);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t k = 0; k < len; ++k) {
        double* dst = dx.data() + (o * len + k) * inner;
        const double* src = up.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) fail(ErrorCode::InvalidAttr, "slice axis out of range");
  if (begin >= end || end > xs[axis]) {
    fail(ErrorCode::InvalidAttr, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                     ") invalid for extent " + std::to_string(xs[axis]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
  for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  const std::size_t len = xs[axis], width = end - begin;
  Shape out_shape = xs;
  out_shape[axis] = width;
  Tensor out(out_shape);
  const auto& xv = x.value().storage();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.data() + (o * len + begin) * inner, width * inner, out.data().data() + o * width * inner);
  }
  const NodeId ix = x.id();
  return x.graph().record(OpKind::Slice, {ix}, std::move(out),
                          [ix, outer, inner, len, width, begin](Graph& g, NodeId self) {
                            auto dx = accum(g, ix);
                            if (dx.empty()) return;
                            const auto up = g.upstream(self);
                            for (std::size_t o = 0; o < outer; ++o) {
                              double* dst = dx.data() + (o * len + begin) * inner;
                              const double* src = up.data() + o * width * inner;
                              for (std::size_t i = 0; i < width * inner; ++i) dst[i] += src[i];
                            }
                          });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::InvalidAttr, "concat of nothing");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) fail(ErrorCode::InvalidAttr, "concat axis out of range");
  Graph& g = parts[0].graph();
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  std::vector<std::size_t> widths;
  std::vector<NodeId> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (&p.graph() != &g) fail(ErrorCode::DetachedNode, "concat across graphs");
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) fail(ErrorCode::ShapeMismatch, "concat " + shape_str(s) + " with " + shape_str(first));
    widths.push_back(s[axis]);
    ids.push_back(p.id());
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value().storage();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * widths[k] * inner, widths[k] * inner,
                  out.data().data() + (o * total + offset) * inner);
    }
    offset += widths[k];
  }
  std::vector<NodeId> inputs = ids;
  return g.record(OpKind::Concat, std::move(inputs), std::move(out),
                  [ids, widths, outer, inner, total](Graph& gr, NodeId self) {
                    const auto up = gr.upstream(self);
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (auto dx = accum(gr, ids[k]); !dx.empty()) {
                        for (std::size_t o = 0; o < outer; ++o) {
                          const double* src = up.data() + (o * total + offset) * inner;
                          double* dst = dx.data() + o * widths[k] * inner;
                          for (std::size_t i = 0; i < widths[k] * inner; ++i) dst[i] += src[i];
                        }
                      }
                      offset += widths[k];
                    }
                  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const NodeId ix = x.id();
  return x.graph().record(OpKind::Reshape, {ix}, std::move(out), [ix](Graph& g, NodeId self) {
    auto dx = accum(g, ix);
    const auto up = g.upstream(self);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up[i];
  });
}

Var transpose(Var x, std::vector<std::size_t> perm) {
  const Shape& xs = x.shape();
  const std::size_t r = xs.size();
  {
    std::vector<std::size_t> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(r);
    std::iota(iota.begin(), iota.end(), 0);
    if (sorted != iota) fail(ErrorCode::InvalidAttr, "transpose permutation is not a permutation of the axes");
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t d = r; d-- > 1;) in_stride[d - 1] = in_stride[d] * xs[d];
  Shape out_shape(r);
  for (std::size_t d = 0; d < r; ++d) out_shape[d] = xs[perm[d]];
  // Source offset for every destination element, in destination order.
  std::vector<std::size_t> src_index(x.size());
  std::vector<std::size_t> counter(r, 0);
  for (std::size_t i = 0; i < src_index.size(); ++i) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < r; ++d) off += counter[d] * in_stride[perm[d]];
    src_index[i] = off;
    for (std::size_t d = r; d-- > 0;) {
      if (++counter[d] < out_shape[d]) break;
      counter[d] = 0;
    }
  }
  Tensor out(out_shape);
  const auto& xv = x.value().storage();
  for (std::size_t i = 0; i < src_index.size(); ++i) out[i] = xv[src_index[i]];
  const NodeId ix = x.id();
  return x.graph().record(OpKind::Transpose, {ix}, std::move(out),
                          [ix, src_index = std::move(src_index)](Graph& g, NodeId self) {
                            auto dx = accum(g, ix);
                            if (dx.empty()) return;
                            const auto up = g.upstream(self);
                            for (std::size_t i = 0; i < src_index.size(); ++i) dx[src_index[i]] += up[i];
                          });
}

}  // namespace sharpseg
