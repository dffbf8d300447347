#pragma once

#include <functional>
#include <vector>

#include "sharpseg/params.hpp"

namespace sharpseg {

struct SAMConfig {
  double rho = 0.05;
  bool enabled = false;
};

/// SGD with heavy-ball (or Nesterov) momentum over a fixed parameter list.
struct OptimizerState {
  ParamList params;
  std::vector<std::vector<double>> velocity;  // one buffer per parameter
  double lr = 5e-3;
  double momentum = 0.99;
  bool nesterov = false;
  std::size_t step_count = 0;

  static OptimizerState create(ParamList params, double lr = 5e-3, double momentum = 0.99, bool nesterov = false);
  void zero_grad();
};

/// v <- momentum v + g; theta <- theta - lr v (Nesterov: theta <- theta -
/// lr (g + momentum v)). ShapeMismatch when a gradient has the wrong size.
void sgd_step(OptimizerState& state, const std::vector<std::vector<double>>& grads);
/// Same, reading each parameter's accumulated grad().
void sgd_step(OptimizerState& state);

/// lr0 (1 - epoch / total)^0.9, floored at 1e-8.
double poly_lr(std::size_t epoch, std::size_t total_epochs, double lr0);

/// Runs forward and backward on the current parameters and returns the
/// loss. Gradients accumulate into the parameters' grad() buffers.
using LossClosure = std::function<double()>;

struct SAMResult {
  double loss_perturbed = 0.0;
  double loss_clean = 0.0;
  double grad_norm = 0.0;     // ||g|| at the unperturbed point
  double epsilon_norm = 0.0;  // 0 on the zero-gradient path
  bool zero_gradient = false;
};

/// Global-norm gradient ascent to theta + rho g / ||g||, gradient there,
/// exact restore of theta, then sgd_step with the perturbed-point gradient.
/// When ||g|| < 1e-12 the perturbation is skipped and the clean gradient is
/// used (zero_gradient is set). NonFinite on a non-finite loss or gradient;
/// parameters are restored before throwing.
SAMResult sam_step(OptimizerState& state, const LossClosure& closure, const SAMConfig& cfg);

/// Plain step: zero grads, closure, sgd_step. Returns the loss.
double plain_step(OptimizerState& state, const LossClosure& closure);

}  // namespace sharpseg
