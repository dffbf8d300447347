#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "sharpseg/blocks.hpp"
#include "sharpseg/error.hpp"
#include "sharpseg/gradcheck.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/ssm.hpp"

using namespace sharpseg;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor({r, c}, std::move(v)); }

struct SsmTensors {
  Tensor A, B, C, D, x0, u;
};

SsmTensors random_system(std::mt19937_64& rng, std::size_t S, std::size_t I, std::size_t O, std::size_t T,
                         bool diagonal) {
  SsmTensors s{diagonal ? random_tensor({S}, rng, -0.9, 0.9) : random_tensor({S, S}, rng, -0.4, 0.4),
               random_tensor({S, I}, rng),
               random_tensor({O, S}, rng),
               random_tensor({O, I}, rng),
               random_tensor({S}, rng),
               random_tensor({T, I}, rng)};
  return s;
}

ScanResult scan_constants(Graph& g, const SsmTensors& s) {
  return ssm_scan({g.constant(s.A), g.constant(s.B), g.constant(s.C), g.constant(s.D), g.constant(s.x0)},
                  g.constant(s.u));
}

std::vector<Tensor*> store_params(ParameterStore& store) {
  std::vector<Tensor*> out;
  for (auto& e : store.entries()) out.push_back(&e.tensor);
  return out;
}

}  // namespace

TEST(SsmScan, ScalarHandTrace) {
  Graph g;
  auto r = ssm_scan({g.constant(mat(1, 1, {0.5})), g.constant(mat(1, 1, {1})), g.constant(mat(1, 1, {1})),
                     g.constant(mat(1, 1, {0})), g.constant(Tensor({1}, 0.0))},
                    g.constant(mat(2, 1, {1, 1})));
  EXPECT_DOUBLE_EQ(r.states.value()[0], 1.0);
  EXPECT_DOUBLE_EQ(r.states.value()[1], 1.5);
  EXPECT_DOUBLE_EQ(r.outputs.value()[0], 0.0);
  EXPECT_DOUBLE_EQ(r.outputs.value()[1], 1.0);
}

TEST(SsmScan, IdentityWithoutInputHoldsInitialState) {
  Graph g;
  Tensor x0({3}, std::vector<double>{0.2, -1.0, 4.0});
  auto r = ssm_scan({g.constant(mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1})), g.constant(Tensor({3, 2}, 0.0)),
                     g.constant(Tensor({1, 3}, 1.0)), g.constant(Tensor({1, 2}, 0.0)), g.constant(x0)},
                    g.constant(Tensor({5, 2}, 7.0)));
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(r.states.value()[t * 3 + s], x0[s]);
}

TEST(SsmScan, ZeroTransitionDelaysByOneStep) {
  std::mt19937_64 rng(1);
  Tensor u = random_tensor({6, 2}, rng), x0 = random_tensor({2}, rng);
  Graph g;
  auto r = ssm_scan({g.constant(Tensor({2, 2}, 0.0)), g.constant(mat(2, 2, {1, 0, 0, 1})),
                     g.constant(mat(2, 2, {1, 0, 0, 1})), g.constant(Tensor({2, 2}, 0.0)), g.constant(x0)},
                    g.constant(u));
  EXPECT_EQ(r.outputs.value()[0], x0[0]);
  EXPECT_EQ(r.outputs.value()[1], x0[1]);
  for (std::size_t t = 1; t < 6; ++t)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(r.outputs.value()[t * 2 + i], u[(t - 1) * 2 + i]);
}

TEST(SsmScan, Errors) {
  Graph g;
  try {
    ssm_scan({g.constant(Tensor({2, 2}, 0.0)), g.constant(Tensor({3, 1}, 0.0)), g.constant(Tensor({1, 2}, 0.0)),
              g.constant(Tensor({1, 1}, 0.0)), g.constant(Tensor({2}, 0.0))},
             g.constant(Tensor({4, 1}, 0.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
  try {
    ssm_scan({g.constant(mat(1, 1, {1e200})), g.constant(mat(1, 1, {1})), g.constant(mat(1, 1, {1})),
              g.constant(mat(1, 1, {0})), g.constant(Tensor({1}, 1.0))},
             g.constant(Tensor({5, 1}, 0.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Overflow);
  }
}

TEST(SsmScan, SplitScanMatchesFullScan) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const bool diagonal = trial % 2 == 0;
    const std::size_t T = 2 + trial % 7, a = 1 + trial % (T - 1), S = 3;
    SsmTensors s = random_system(rng, S, 2, 2, T, diagonal);
    Graph g;
    auto full = scan_constants(g, s);
    SsmTensors first = s, second = s;
    first.u = Tensor({a, 2}, std::vector<double>(s.u.data().begin(), s.u.data().begin() + a * 2));
    second.u = Tensor({T - a, 2}, std::vector<double>(s.u.data().begin() + a * 2, s.u.data().end()));
    auto r1 = scan_constants(g, first);
    second.x0 = Tensor({S}, std::vector<double>(r1.states.value().data().end() - S, r1.states.value().data().end()));
    auto r2 = scan_constants(g, second);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& st = t < a ? r1.states.value() : r2.states.value();
      const auto& ot = t < a ? r1.outputs.value() : r2.outputs.value();
      const std::size_t tl = t < a ? t : t - a;
      for (std::size_t i = 0; i < S; ++i) EXPECT_NEAR(full.states.value()[t * S + i], st[tl * S + i], 1e-12);
      for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(full.outputs.value()[t * 2 + i], ot[tl * 2 + i], 1e-12);
    }
  }
}

TEST(SsmScan, GradientsThroughEveryInput) {
  std::mt19937_64 rng(3);
  for (bool diagonal : {false, true}) {
    SsmTensors s = random_system(rng, 3, 2, 2, 6, diagonal);
    const Tensor ws = random_tensor({6, 3}, rng), wo = random_tensor({6, 2}, rng);
    std::vector<Tensor*> params{&s.A, &s.B, &s.C, &s.D, &s.x0, &s.u};
    const double err = grad_check(
        [&](Graph& g) {
          auto r = ssm_scan({g.parameter(s.A), g.parameter(s.B), g.parameter(s.C), g.parameter(s.D), g.parameter(s.x0)},
                            g.parameter(s.u));
          return add(sum(mul(r.states, g.constant(ws))), sum(mul(r.outputs, g.constant(wo))));
        },
        params);
    EXPECT_LT(err, 1e-4) << diagonal;
  }
}

TEST(ChannelScan, StaticMatchesPerChannelStateSpaceScan) {
  std::mt19937_64 rng(4);
  const std::size_t N = 2, T = 7, E = 3, S = 4;
  Tensor u = random_tensor({N, T, E}, rng), a = random_tensor({E, S}, rng, 0.1, 0.95);
  Tensor b = random_tensor({E, S}, rng), c = random_tensor({E, S}, rng), d = random_tensor({E}, rng);
  Graph g;
  Var y = channel_scan(g.constant(u), g.constant(a), g.constant(b), g.constant(c), g.constant(d));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t e = 0; e < E; ++e) {
      Tensor ue({T, 1});
      for (std::size_t t = 0; t < T; ++t) ue[t] = u[(n * T + t) * E + e];
      auto slice_row = [&](const Tensor& m, Shape shape) {
        return Tensor(std::move(shape), std::vector<double>(m.data().begin() + e * S, m.data().begin() + (e + 1) * S));
      };
      auto r = ssm_scan({g.constant(slice_row(a, {S})), g.constant(slice_row(b, {S, 1})),
                         g.constant(slice_row(c, {1, S})), g.constant(mat(1, 1, {d[e]})),
                         g.constant(Tensor({S}, 0.0))},
                        g.constant(ue));
      for (std::size_t t = 0; t < T; ++t) EXPECT_NEAR(y.value()[(n * T + t) * E + e], r.outputs.value()[t], 1e-12);
    }
  }
}

TEST(ChannelScan, SelectiveMatchesDirectLoops) {
  std::mt19937_64 rng(5);
  const std::size_t N = 2, T = 6, E = 3, S = 2;
  Tensor u = random_tensor({N, T, E}, rng), a = random_tensor({E, S}, rng, 0.1, 0.95);
  Tensor b = random_tensor({N, T, S}, rng), c = random_tensor({N, T, S}, rng), d = random_tensor({E}, rng);
  Graph g;
  Var y = channel_scan(g.constant(u), g.constant(a), g.constant(b), g.constant(c), g.constant(d));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t e = 0; e < E; ++e) {
      std::vector<double> h(S, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t nt = n * T + t;
        double expect = d[e] * u[nt * E + e];
        for (std::size_t s = 0; s < S; ++s) expect += c[nt * S + s] * h[s];
        for (std::size_t s = 0; s < S; ++s) h[s] = a[e * S + s] * h[s] + b[nt * S + s] * u[nt * E + e];
        EXPECT_NEAR(y.value()[nt * E + e], expect, 1e-12);
      }
    }
  }
}

TEST(ChannelScan, GradCheckStaticAndSelective) {
  std::mt19937_64 rng(6);
  const std::size_t N = 2, T = 5, E = 3, S = 2;
  for (bool selective : {false, true}) {
    Tensor u = random_tensor({N, T, E}, rng), a = random_tensor({E, S}, rng, 0.1, 0.95);
    Shape bc = selective ? Shape{N, T, S} : Shape{E, S};
    Tensor b = random_tensor(bc, rng), c = random_tensor(bc, rng), d = random_tensor({E}, rng);
    const Tensor w = random_tensor({N, T, E}, rng);
    std::vector<Tensor*> params{&u, &a, &b, &c, &d};
    const double err = grad_check(
        [&](Graph& g) {
          return sum(mul(channel_scan(g.parameter(u), g.parameter(a), g.parameter(b), g.parameter(c), g.parameter(d)),
                         g.constant(w)));
        },
        params);
    EXPECT_LT(err, 1e-4) << selective;
  }
}

TEST(ChannelScan, RejectsMismatchedShapes) {
  Graph g;
  EXPECT_THROW(channel_scan(g.constant(Tensor({1, 4, 3})), g.constant(Tensor({2, 2})), g.constant(Tensor({3, 2})),
                            g.constant(Tensor({3, 2})), g.constant(Tensor({3}))),
               Error);
}

TEST(Attention, SingleTokenReturnsValues) {
  std::mt19937_64 rng(7);
  Tensor q = random_tensor({1, 3}, rng), k = random_tensor({1, 3}, rng), v = random_tensor({1, 4}, rng);
  Graph g;
  Var out = selective_attention(g.constant(q), g.constant(k), g.constant(v));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.value()[i], v[i]);
}

TEST(Attention, EqualScoresAverageValues) {
  std::mt19937_64 rng(8);
  Tensor q({3, 2}, 0.0), k = random_tensor({3, 2}, rng), v = random_tensor({3, 2}, rng);
  Graph g;
  Var out = selective_attention(g.constant(q), g.constant(k), g.constant(v));
  for (std::size_t j = 0; j < 2; ++j) {
    const double col_mean = (v[j] + v[2 + j] + v[4 + j]) / 3.0;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.value()[i * 2 + j], col_mean, 1e-15);
  }
}

TEST(Attention, TwoTokenHandValue) {
  Graph g;
  Var out = selective_attention(g.constant(mat(2, 1, {1, 0})), g.constant(mat(2, 1, {1, 0})),
                                g.constant(mat(2, 2, {1, 0, 0, 1})));
  const double w0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(out.value()[0], w0, 1e-15);
  EXPECT_NEAR(out.value()[1], 1.0 - w0, 1e-15);
  EXPECT_NEAR(out.value()[0], 0.7311, 5e-5);
  EXPECT_NEAR(out.value()[1], 0.2689, 5e-5);
}

TEST(Attention, RowsAreConvexWeights) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t T = 2 + trial % 5;
    Tensor q = random_tensor({T, 3}, rng, -3, 3), k = random_tensor({T, 3}, rng, -3, 3);
    Tensor eye({T, T}, 0.0);
    for (std::size_t i = 0; i < T; ++i) eye[i * T + i] = 1.0;
    Graph g;
    Var w = selective_attention(g.constant(q), g.constant(k), g.constant(eye));
    for (std::size_t i = 0; i < T; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        EXPECT_GE(w.value()[i * T + j], 0.0);
        row += w.value()[i * T + j];
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(Attention, PermutingQueriesPermutesOutputs) {
  std::mt19937_64 rng(10);
  const std::size_t T = 5;
  Tensor q = random_tensor({T, 2}, rng), k = random_tensor({T, 2}, rng), v = random_tensor({T, 3}, rng);
  std::vector<std::size_t> perm(T);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor qp({T, 2});
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < 2; ++j) qp[i * 2 + j] = q[perm[i] * 2 + j];
  Graph g;
  Var out = selective_attention(g.constant(q), g.constant(k), g.constant(v));
  Var outp = selective_attention(g.constant(qp), g.constant(k), g.constant(v));
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(outp.value()[i * 3 + j], out.value()[perm[i] * 3 + j]);
}

TEST(Attention, ShrinkingQueriesApproachColumnMean) {
  std::mt19937_64 rng(11);
  const std::size_t T = 4;
  Tensor q = random_tensor({T, 2}, rng), k = random_tensor({T, 2}, rng), v = random_tensor({T, 2}, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double c : {1.0, 1e-2, 1e-4, 1e-8}) {
    Tensor qs = q;
    for (auto& x : qs.data()) x *= c;
    Graph g;
    Var out = selective_attention(g.constant(qs), g.constant(k), g.constant(v));
    double dev = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < T; ++i) m += v[i * 2 + j] / T;
      for (std::size_t i = 0; i < T; ++i) dev = std::max(dev, std::abs(out.value()[i * 2 + j] - m));
    }
    EXPECT_LE(dev, prev);
    prev = dev;
  }
  EXPECT_LT(prev, 1e-7);
}

TEST(Attention, ErrorsAndGradients) {
  Graph g;
  try {
    selective_attention(g.constant(Tensor({2, 3})), g.constant(Tensor({2, 2})), g.constant(Tensor({2, 2})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
  std::mt19937_64 rng(12);
  Tensor q = random_tensor({4, 3}, rng), k = random_tensor({4, 3}, rng), v = random_tensor({4, 2}, rng);
  const Tensor w = random_tensor({4, 2}, rng);
  std::vector<Tensor*> params{&q, &k, &v};
  EXPECT_LT(grad_check(
                [&](Graph& gg) {
                  return sum(mul(selective_attention(gg.parameter(q), gg.parameter(k), gg.parameter(v)),
                                 gg.constant(w)));
                },
                params),
            1e-4);
}

TEST(MambaBlock, ZeroOutputProjectionGivesZero) {
  std::mt19937_64 rng(13);
  ParameterStore store;
  MambaBlock m = MambaBlock::create(store, "m", MambaConfig{3, 2, 4, true}, rng);
  for (auto& v : store[m.out_proj_index()].data()) v = 0.0;
  Graph g;
  ParamBinder bind(g, store);
  Var out = m.forward(bind, g.constant(Tensor({1, 3, 4, 4}, 0.0)));
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(MambaBlock, ShapeContractAndDecayInit) {
  std::mt19937_64 rng(14);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const std::size_t C = 1 + trial % 4, N = 1 + trial % 2;
    const bool three_d = trial % 3 == 0;
    Shape shape = three_d ? Shape{N, C, 2, 3, 2} : Shape{N, C, 3 + trial % 3, 2 + trial % 4};
    ParameterStore store;
    MambaBlock m = MambaBlock::create(store, "m", MambaConfig{C, 1 + trial % 2, 1 + trial % 4, trial % 2 == 0}, rng);
    Graph g;
    ParamBinder bind(g, store);
    Var out = m.forward(bind, g.constant(random_tensor(shape, rng)));
    EXPECT_EQ(out.shape(), shape);
    for (double logit : store.at("m.a_logit").data()) {
      const double a = 1.0 / (1.0 + std::exp(-logit));
      EXPECT_GE(a, 0.5 - 1e-12);
      EXPECT_LE(a, 0.95 + 1e-12);
    }
  }
}

TEST(MambaBlock, WrongChannelCountIsShapeMismatch) {
  std::mt19937_64 rng(15);
  ParameterStore store;
  MambaBlock m = MambaBlock::create(store, "m", MambaConfig{3, 2, 2, true}, rng);
  Graph g;
  ParamBinder bind(g, store);
  try {
    m.forward(bind, g.constant(Tensor({1, 2, 4, 4})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(MambaBlock, GradCheckOnSmallInputs) {
  std::mt19937_64 rng(16);
  for (std::size_t C : {1, 3}) {
    for (bool selective : {true, false}) {
      ParameterStore store;
      MambaBlock m = MambaBlock::create(store, "m", MambaConfig{C, 2, 3, selective}, rng);
      for (auto& e : store.entries())
        for (auto& v : e.tensor.data()) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
      Tensor x = random_tensor({1, C, 4, 4}, rng);
      const Tensor w = random_tensor({1, C, 4, 4}, rng);
      auto params = store_params(store);
      params.push_back(&x);
      const double err = grad_check(
          [&](Graph& g) {
            ParamBinder bind(g, store);
            return sum(mul(m.forward(bind, g.parameter(x)), g.constant(w)));
          },
          params);
      EXPECT_LT(err, 1e-4) << C << " " << selective;
    }
  }
}

TEST(ResidualBlock, ChannelChangeUsesProjection) {
  std::mt19937_64 rng(17);
  ParameterStore store;
  ResidualBlock r = ResidualBlock::create(store, "r", 2, 5, 2, rng);
  EXPECT_TRUE(store.contains("r.skip"));
  Graph g;
  ParamBinder bind(g, store);
  EXPECT_EQ(r.forward(bind, g.constant(random_tensor({2, 2, 4, 6}, rng))).shape(), (Shape{2, 5, 4, 6}));
}

TEST(UMambaBlock, IdentityConvsAndZeroProjectionTraceResiduals) {
  std::mt19937_64 rng(18);
  const std::size_t C = 2, H = 4, W = 4;
  ParameterStore store;
  UMambaBlock b = UMambaBlock::create(store, "u", C, C, 2, MambaConfig{C, 2, 2, true}, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    Tensor& k = store[b.residual(i).conv_index()];
    for (auto& v : k.data()) v = 0.0;
    for (std::size_t c = 0; c < C; ++c) k[((c * C + c) * 3 + 1) * 3 + 1] = 1.0;
  }
  for (auto& v : store[b.mamba().out_proj_index()].data()) v = 0.0;
  Tensor x = random_tensor({1, C, H, W}, rng);

  // Hand trace: each residual block maps h to h + lrelu(normalize(h)).
  auto residual = [&](const Tensor& h) {
    Tensor out = h;
    for (std::size_t c = 0; c < C; ++c) {
      double m = 0.0, var = 0.0;
      for (std::size_t i = 0; i < H * W; ++i) m += h[c * H * W + i] / (H * W);
      for (std::size_t i = 0; i < H * W; ++i) var += (h[c * H * W + i] - m) * (h[c * H * W + i] - m) / (H * W);
      for (std::size_t i = 0; i < H * W; ++i) {
        const double z = (h[c * H * W + i] - m) / std::sqrt(var + 1e-5);
        out[c * H * W + i] += z > 0 ? z : 0.01 * z;
      }
    }
    return out;
  };
  const Tensor expect = residual(residual(x));
  Graph g;
  ParamBinder bind(g, store);
  Var out = b.forward(bind, g.constant(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out.value()[i], expect[i], 1e-12);
}

TEST(UMambaBlock, ShapeContract) {
  std::mt19937_64 rng(19);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const std::size_t cin = 1 + trial % 3, cout = 2 + trial % 2;
    const std::size_t rank = trial % 4 == 3 ? 3 : 2;
    Shape shape = rank == 3 ? Shape{1, cin, 3, 4, 2} : Shape{1 + trial % 2, cin, 4 + trial % 3, 5};
    ParameterStore store;
    UMambaBlock b = UMambaBlock::create(store, "u", cin, cout, rank, MambaConfig{cout, 2, 2, true}, rng);
    Graph g;
    ParamBinder bind(g, store);
    Shape want = shape;
    want[1] = cout;
    EXPECT_EQ(b.forward(bind, g.constant(random_tensor(shape, rng))).shape(), want);
  }
}

TEST(UMambaBlock, GradCheckOnSmallInput) {
  std::mt19937_64 rng(20);
  ParameterStore store;
  UMambaBlock b = UMambaBlock::create(store, "u", 1, 2, 2, MambaConfig{2, 2, 2, true}, rng);
  Tensor x = random_tensor({1, 1, 4, 4}, rng);
  const Tensor w = random_tensor({1, 2, 4, 4}, rng);
  auto params = store_params(store);
  params.push_back(&x);
  const double err = grad_check(
      [&](Graph& g) {
        ParamBinder bind(g, store);
        return sum(mul(b.forward(bind, g.parameter(x)), g.constant(w)));
      },
      params);
  EXPECT_LT(err, 1e-4);
}
