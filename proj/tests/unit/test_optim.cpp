#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sharpseg/error.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/optim.hpp"

using namespace sharpseg;

namespace {

// L(theta) = 0.5 theta^T A theta + b^T theta with A symmetric positive definite.
struct Quadratic {
  Tensor A, b;

  static Quadratic random(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    Tensor m({n, n});
    for (auto& v : m.data()) v = d(rng);
    Quadratic q{Tensor({n, n}, 0.0), Tensor({n, 1})};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = i == j ? 0.5 : 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += m[i * n + k] * m[j * n + k];
        q.A[i * n + j] = acc;
      }
    for (auto& v : q.b.data()) v = d(rng);
    return q;
  }

  LossClosure closure(Tensor& theta) const {
    return [this, &theta] {
      Graph g;
      Var t = g.parameter(theta);
      Var loss = add(mul_scalar(sum(mul(t, matmul(g.constant(A), t))), 0.5), sum(mul(g.constant(b), t)));
      g.backward(loss);
      return loss.item();
    };
  }
};

}  // namespace

TEST(Sgd, PlainStep) {
  Tensor theta({1}, 1.0);
  auto st = OptimizerState::create({{"t", &theta}}, 0.1, 0.0);
  sgd_step(st, {{2.0}});
  EXPECT_DOUBLE_EQ(theta[0], 0.8);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Sgd, MomentumHandRecurrence) {
  Tensor theta({1}, 0.0);
  auto st = OptimizerState::create({{"t", &theta}}, 1.0, 0.9);
  sgd_step(st, {{1.0}});
  EXPECT_DOUBLE_EQ(st.velocity[0][0], 1.0);
  EXPECT_DOUBLE_EQ(theta[0], -1.0);
  sgd_step(st, {{1.0}});
  EXPECT_DOUBLE_EQ(st.velocity[0][0], 1.9);
  EXPECT_DOUBLE_EQ(theta[0], -2.9);
}

TEST(Sgd, NesterovLooksAhead) {
  Tensor theta({1}, 0.0);
  auto st = OptimizerState::create({{"t", &theta}}, 1.0, 0.9, true);
  sgd_step(st, {{1.0}});
  EXPECT_DOUBLE_EQ(theta[0], -1.9);
}

TEST(Sgd, ZeroGradientKeepsParameters) {
  Tensor theta({3}, std::vector<double>{1, -2, 3});
  const Tensor before = theta;
  auto st = OptimizerState::create({{"t", &theta}});
  sgd_step(st, {{0.0, 0.0, 0.0}});
  EXPECT_TRUE(theta == before);
}

TEST(Sgd, GradientSizeMismatch) {
  Tensor theta({3}, 1.0);
  auto st = OptimizerState::create({{"t", &theta}});
  try {
    sgd_step(st, {{1.0, 2.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  EXPECT_THROW(OptimizerState::create({{"t", &theta}}, 0.1, 1.0), Error);
}

TEST(PolyLr, Schedule) {
  EXPECT_DOUBLE_EQ(poly_lr(0, 500, 5e-3), 5e-3);
  EXPECT_DOUBLE_EQ(poly_lr(500, 500, 5e-3), 1e-8);
  EXPECT_NEAR(poly_lr(250, 500, 5e-3), 2.679e-3, 5e-7);
  EXPECT_DOUBLE_EQ(poly_lr(250, 500, 5e-3), 5e-3 * std::pow(0.5, 0.9));
  double prev = 1.0;
  for (std::size_t e = 0; e <= 100; ++e) {
    const double lr = poly_lr(e, 100, 1.0);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Sam, HandTraceOneDimension) {
  Tensor theta({1}, 1.0);
  auto st = OptimizerState::create({{"t", &theta}}, 0.1, 0.0);
  auto closure = [&] {
    Graph g;
    Var t = g.parameter(theta);
    Var loss = mul_scalar(sum(mul(t, t)), 0.5);
    g.backward(loss);
    return loss.item();
  };
  SAMResult r = sam_step(st, closure, {0.1, true});
  EXPECT_DOUBLE_EQ(r.grad_norm, 1.0);
  EXPECT_DOUBLE_EQ(r.epsilon_norm, 0.1);
  EXPECT_DOUBLE_EQ(r.loss_clean, 0.5);
  EXPECT_DOUBLE_EQ(r.loss_perturbed, 0.5 * 1.1 * 1.1);
  EXPECT_DOUBLE_EQ(theta[0], 1.0 - 0.1 * 1.1);
  EXPECT_NEAR(theta[0], 0.89, 1e-15);
}

TEST(Sam, ConstantLossTakesZeroGradientPath) {
  Tensor theta({2}, std::vector<double>{0.3, -0.7});
  const Tensor before = theta;
  auto st = OptimizerState::create({{"t", &theta}}, 0.1, 0.9);
  auto closure = [&] {
    Graph g;
    Var loss = add(mul_scalar(sum(g.parameter(theta)), 0.0), g.constant(Tensor::scalar(3.0)));
    g.backward(loss);
    return loss.item();
  };
  SAMResult r = sam_step(st, closure, {0.05, true});
  EXPECT_TRUE(r.zero_gradient);
  EXPECT_EQ(r.epsilon_norm, 0.0);
  EXPECT_TRUE(theta == before);
}

TEST(Sam, PerturbationHasNormRho) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Quadratic q = Quadratic::random(5, rng);
    Tensor theta({5, 1});
    for (auto& v : theta.data()) v = std::normal_distribution<double>(0, 1)(rng);
    auto st = OptimizerState::create({{"t", &theta}}, 0.01, 0.9);
    const double rho = 0.01 * (1 + trial);
    SAMResult r = sam_step(st, q.closure(theta), {rho, true});
    EXPECT_NEAR(r.epsilon_norm, rho, 1e-9 * rho);
  }
}

TEST(Sam, VanishingRadiusMatchesSgd) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Quadratic q = Quadratic::random(4, rng);
    Tensor a({4, 1});
    for (auto& v : a.data()) v = std::normal_distribution<double>(0, 1)(rng);
    Tensor b = a;
    auto sa = OptimizerState::create({{"t", &a}}, 0.05, 0.9);
    auto sb = OptimizerState::create({{"t", &b}}, 0.05, 0.9);
    for (int step = 0; step < 5; ++step) {
      sam_step(sa, q.closure(a), {1e-12, true});
      plain_step(sb, q.closure(b));
    }
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(Sam, ParametersEndAtPreCallValueMinusUpdate) {
  std::mt19937_64 rng(3);
  Quadratic q = Quadratic::random(6, rng);
  Tensor theta({6, 1});
  for (auto& v : theta.data()) v = std::normal_distribution<double>(0, 1)(rng);
  auto st = OptimizerState::create({{"t", &theta}}, 0.02, 0.5);
  st.velocity[0].assign(6, 0.25);
  const Tensor before = theta;
  const auto v_before = st.velocity[0];
  sam_step(st, q.closure(theta), {0.05, true});
  // The step-2 gradient is still in grad(): rebuild theta_pre - lr v_new.
  for (std::size_t i = 0; i < 6; ++i) {
    const double v = 0.5 * v_before[i] + theta.grad()[i];
    EXPECT_EQ(st.velocity[0][i], v);
    EXPECT_EQ(theta[i], before[i] - 0.02 * v);
  }
}

TEST(Sam, NonFiniteRestoresParameters) {
  Tensor theta({1}, 1.0);
  const Tensor before = theta;
  auto st = OptimizerState::create({{"t", &theta}}, 0.1, 0.0);
  int calls = 0;
  auto closure = [&] {
    Graph g;
    Var t = g.parameter(theta);
    Var loss = mul_scalar(sum(mul(t, t)), 0.5);
    g.backward(loss);
    return ++calls == 2 ? std::nan("") : loss.item();
  };
  try {
    sam_step(st, closure, {0.1, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
  EXPECT_TRUE(theta == before);
  EXPECT_THROW(sam_step(st, closure, {0.1, false}), Error);
}
