#include "sharpseg/optim.hpp"

#include <cmath>

#include "sharpseg/error.hpp"

namespace sharpseg {

OptimizerState OptimizerState::create(ParamList params, double lr, double momentum, bool nesterov) {
  if (!(lr > 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    fail(ErrorCode::InvalidConfig, "optimizer needs lr > 0 and momentum in [0, 1)");
  }
  OptimizerState s;
  for (const auto& p : params) {
    if (p.tensor == nullptr) fail(ErrorCode::InvalidConfig, "null parameter " + p.name);
    if (!p.tensor->requires_grad()) p.tensor->set_requires_grad(true);
    s.velocity.emplace_back(p.tensor->size(), 0.0);
  }
  s.params = std::move(params);
  s.lr = lr;
  s.momentum = momentum;
  s.nesterov = nesterov;
  return s;
}

void OptimizerState::zero_grad() {
  for (auto& p : params) p.tensor->zero_grad();
}

namespace {

template <class GradAt>
void apply(OptimizerState& s, GradAt grad_at) {
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    auto theta = s.params[i].tensor->data();
    auto& v = s.velocity[i];
    const std::span<const double> g = grad_at(i);
    if (g.size() != theta.size() || v.size() != theta.size()) {
      fail(ErrorCode::ShapeMismatch, "gradient for " + s.params[i].name + " has " + std::to_string(g.size()) +
                                         " entries, parameter has " + std::to_string(theta.size()));
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
      v[j] = s.momentum * v[j] + g[j];
      theta[j] -= s.lr * (s.nesterov ? g[j] + s.momentum * v[j] : v[j]);
    }
  }
  ++s.step_count;
}

double global_norm(const OptimizerState& s) {
  double sq = 0.0;
  for (const auto& p : s.params)
    for (double g : p.tensor->grad()) sq += g * g;
  return std::sqrt(sq);
}

void require_finite(double loss, double norm, const char* where) {
  if (!std::isfinite(loss) || !std::isfinite(norm)) {
    fail(ErrorCode::NonFinite, std::string("non-finite loss or gradient at the ") + where + " point");
  }
}

}  // namespace

void sgd_step(OptimizerState& state, const std::vector<std::vector<double>>& grads) {
  if (grads.size() != state.params.size()) {
    fail(ErrorCode::ShapeMismatch, "expected " + std::to_string(state.params.size()) + " gradients");
  }
  apply(state, [&](std::size_t i) { return std::span<const double>(grads[i]); });
}

void sgd_step(OptimizerState& state) {
  apply(state, [&](std::size_t i) { return std::span<const double>(state.params[i].tensor->grad()); });
}

double poly_lr(std::size_t epoch, std::size_t total_epochs, double lr0) {
  if (total_epochs == 0) fail(ErrorCode::InvalidConfig, "poly_lr needs total_epochs > 0");
  const double frac = 1.0 - static_cast<double>(std::min(epoch, total_epochs)) / static_cast<double>(total_epochs);
  return std::max(lr0 * std::pow(frac, 0.9), 1e-8);
}

double plain_step(OptimizerState& state, const LossClosure& closure) {
  state.zero_grad();
  const double loss = closure();
  require_finite(loss, global_norm(state), "current");
  sgd_step(state);
  return loss;
}

SAMResult sam_step(OptimizerState& state, const LossClosure& closure, const SAMConfig& cfg) {
  if (!cfg.enabled) fail(ErrorCode::InvalidConfig, "sam_step called with SAM disabled");
  if (!(cfg.rho > 0.0)) fail(ErrorCode::InvalidConfig, "SAM rho must be positive");
  SAMResult r;
  state.zero_grad();
  r.loss_clean = closure();
  r.grad_norm = global_norm(state);
  require_finite(r.loss_clean, r.grad_norm, "current");
  if (r.grad_norm < 1e-12) {
    r.zero_gradient = true;
    r.loss_perturbed = r.loss_clean;
    sgd_step(state);
    return r;
  }

  std::vector<std::vector<double>> saved;
  saved.reserve(state.params.size());
  const double scale = cfg.rho / r.grad_norm;
  double eps_sq = 0.0;
  for (auto& p : state.params) {
    auto theta = p.tensor->data();
    saved.emplace_back(theta.begin(), theta.end());
    const auto g = p.tensor->grad();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double e = scale * g[j];
      eps_sq += e * e;
      theta[j] += e;
    }
  }
  r.epsilon_norm = std::sqrt(eps_sq);

  auto restore = [&] {
    for (std::size_t i = 0; i < state.params.size(); ++i) {
      std::copy(saved[i].begin(), saved[i].end(), state.params[i].tensor->data().begin());
    }
  };
  try {
    state.zero_grad();
    r.loss_perturbed = closure();
    require_finite(r.loss_perturbed, global_norm(state), "perturbed");
  } catch (...) {
    restore();
    throw;
  }
  restore();
  sgd_step(state);
  return r;
}

}  // namespace sharpseg
