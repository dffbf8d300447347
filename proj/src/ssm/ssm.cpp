#include "sharpseg/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "sharpseg/error.hpp"
#include "sharpseg/ops.hpp"
#include "tensor/detail.hpp"

namespace sharpseg {

namespace {

void require_rank(const Var& v, std::size_t rank, const char* what) {
  if (!v.valid() || v.value().rank() != rank) {
    fail(ErrorCode::DimMismatch, std::string(what) + " must have rank " + std::to_string(rank));
  }
}

void require_extent(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    fail(ErrorCode::DimMismatch,
         std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

ScanResult ssm_scan(const SSMParams& p, Var u) {
  require_rank(u, 2, "u");
  require_rank(p.B, 2, "B");
  require_rank(p.C, 2, "C");
  require_rank(p.D, 2, "D");
  require_rank(p.x0, 1, "x0");
  const std::size_t T = u.shape()[0], n_in = u.shape()[1];
  const std::size_t S = p.x0.shape()[0], n_out = p.C.shape()[0];
  const bool diagonal = p.A.valid() && p.A.value().rank() == 1;
  if (!diagonal) require_rank(p.A, 2, "A");
  require_extent(p.A.shape()[0], S, "A rows");
  if (!diagonal) require_extent(p.A.shape()[1], S, "A cols");
  require_extent(p.B.shape()[0], S, "B rows");
  require_extent(p.B.shape()[1], n_in, "B cols");
  require_extent(p.C.shape()[1], S, "C cols");
  require_extent(p.D.shape()[0], n_out, "D rows");
  require_extent(p.D.shape()[1], n_in, "D cols");

  const Var a_col = diagonal ? reshape(p.A, {S, 1}) : p.A;
  Var x = reshape(p.x0, {S, 1});
  std::vector<Var> states, outputs;
  states.reserve(T);
  outputs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Var ut = reshape(slice(u, 0, t, t + 1), {n_in, 1});
    const Var y = add(matmul(p.C, x), matmul(p.D, ut));
    outputs.push_back(reshape(y, {1, n_out}));
    const Var ax = diagonal ? mul(a_col, x) : matmul(a_col, x);
    x = add(ax, matmul(p.B, ut));
    for (double v : x.value().data()) {
      if (!std::isfinite(v)) fail(ErrorCode::Overflow, "state diverged at step " + std::to_string(t));
    }
    states.push_back(reshape(x, {1, S}));
  }
  return {concat(states, 0), concat(outputs, 0)};
}

Var selective_attention(Var q, Var k, Var v) {
  require_rank(q, 2, "Q");
  require_rank(k, 2, "K");
  require_rank(v, 2, "V");
  const std::size_t dk = q.shape()[1];
  if (dk == 0) fail(ErrorCode::DimMismatch, "d_k must be at least 1");
  require_extent(k.shape()[1], dk, "K columns");
  require_extent(v.shape()[0], k.shape()[0], "V rows");
  const Var logits = mul_scalar(matmul(q, transpose(k, {1, 0})), 1.0 / std::sqrt(static_cast<double>(dk)));
  return matmul(softmax(logits, -1), v);
}

Var channel_scan(Var u, Var a, Var b, Var c, Var d) {
  require_rank(u, 3, "u");
  require_rank(a, 2, "a");
  require_rank(d, 1, "d");
  const std::size_t N = u.shape()[0], T = u.shape()[1], E = u.shape()[2], S = a.shape()[1];
  require_extent(a.shape()[0], E, "a rows");
  require_extent(d.shape()[0], E, "d length");
  const bool selective = b.valid() && b.value().rank() == 3;
  for (const Var* m : {&b, &c}) {
    if (selective) {
      require_rank(*m, 3, "b/c");
      require_extent(m->shape()[0], N, "b/c batch");
      require_extent(m->shape()[1], T, "b/c time");
    } else {
      require_rank(*m, 2, "b/c");
      require_extent(m->shape()[0], E, "b/c rows");
    }
    require_extent(m->shape()[selective ? 2 : 1], S, "b/c state");
  }

  // Offsets of b_t / c_t for (n, t, e): static rows follow e, selective rows
  // follow (n, t).
  const std::size_t nt_stride = selective ? S : 0, e_stride = selective ? 0 : S;

  const auto& uv = u.value();
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto& cv = c.value();
  const auto& dv = d.value();

  // hist[n, t, e, s]: state entering step t, t in [0, T].
  auto hist = std::make_shared<std::vector<double>>(N * (T + 1) * E * S, 0.0);
  Tensor out({N, T, E});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t t = 0; t < T; ++t) {
      const double* h = hist->data() + (n * (T + 1) + t) * E * S;
      double* h_next = hist->data() + (n * (T + 1) + t + 1) * E * S;
      const std::size_t nt = n * T + t;
      for (std::size_t e = 0; e < E; ++e) {
        const double ut = uv[nt * E + e];
        const double* bt = bv.data().data() + nt * nt_stride + e * e_stride;
        const double* ct = cv.data().data() + nt * nt_stride + e * e_stride;
        const double* ae = av.data().data() + e * S;
        double y = dv[e] * ut;
        for (std::size_t s = 0; s < S; ++s) {
          const double hs = h[e * S + s];
          y += ct[s] * hs;
          h_next[e * S + s] = ae[s] * hs + bt[s] * ut;
        }
        if (!std::isfinite(y)) fail(ErrorCode::Overflow, "channel scan diverged at step " + std::to_string(t));
        out[nt * E + e] = y;
      }
    }
  }

  return u.graph().record(
      OpKind::Scan, {u.id(), a.id(), b.id(), c.id(), d.id()}, std::move(out),
      [=](Graph& g, NodeId self) {
        const auto gy = g.upstream(self);
        const auto& uv = g.value(u.id());
        const auto& av = g.value(a.id());
        const auto& bv = g.value(b.id());
        const auto& cv = g.value(c.id());
        const auto& dv = g.value(d.id());
        auto gu = detail::accum(g, u.id());
        auto ga = detail::accum(g, a.id());
        auto gb = detail::accum(g, b.id());
        auto gc = detail::accum(g, c.id());
        auto gd = detail::accum(g, d.id());
        // lam[e, s]: adjoint of the state entering step t + 1.
        std::vector<double> lam(E * S);
        for (std::size_t n = 0; n < N; ++n) {
          std::fill(lam.begin(), lam.end(), 0.0);
          for (std::size_t tt = T; tt-- > 0;) {
            const double* h = hist->data() + (n * (T + 1) + tt) * E * S;
            const std::size_t nt = n * T + tt;
            for (std::size_t e = 0; e < E; ++e) {
              const double ut = uv[nt * E + e];
              const double gyt = gy[nt * E + e];
              const std::size_t bo = nt * nt_stride + e * e_stride;
              const double* bt = bv.data().data() + bo;
              const double* ct = cv.data().data() + bo;
              const double* ae = av.data().data() + e * S;
              double* le = lam.data() + e * S;
              double gu_acc = gyt * dv[e];
              for (std::size_t s = 0; s < S; ++s) {
                const double l_next = le[s];
                const double hs = h[e * S + s];
                gu_acc += l_next * bt[s];
                if (!ga.empty()) ga[e * S + s] += l_next * hs;
                if (!gb.empty()) gb[bo + s] += l_next * ut;
                if (!gc.empty()) gc[bo + s] += gyt * hs;
                le[s] = ae[s] * l_next + ct[s] * gyt;
              }
              if (!gu.empty()) gu[nt * E + e] += gu_acc;
              if (!gd.empty()) gd[e] += gyt * ut;
            }
          }
        }
      });
}

}  // namespace sharpseg
