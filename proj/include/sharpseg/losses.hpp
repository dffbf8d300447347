#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sharpseg/graph.hpp"

namespace sharpseg {

// Probability maps and one-hot targets are [N, K, spatial...] with classes
// on axis 1. Class 0 is background.

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbFloor = 1e-12;

/// 1 - (2 sum(p g) + s) / (sum(p) + sum(g) + s) per foreground class, summed
/// over batch and space, averaged over classes 1..K-1. DomainError when p
/// leaves [0, 1] by more than 1e-9; ShapeMismatch on unequal shapes.
Var dice_loss(Var p, Var g, double smooth = kDiceSmooth);

/// Mean over pixels of -sum_k g log(max(p, 1e-12)).
Var ce_loss(Var p, Var g);

struct FocalConfig {
  double gamma = 2.0;
};

/// Mean over pixels of -sum_k (1 - p)^gamma g log(max(p, 1e-12)).
/// gamma == 0 is computed as ce_loss.
Var focal_loss(Var p, Var g, const FocalConfig& cfg = {});

enum class LossComponent { Dice, CrossEntropy, Focal };

const char* component_name(LossComponent c) noexcept;
/// "dice", "ce", "focal"; InvalidConfig otherwise.
LossComponent parse_component(const std::string& name);
Var component_loss(LossComponent c, Var p, Var g, const FocalConfig& focal = {});

/// softplus(raw) == 1.
double sigma_raw_for_unit_sigma() noexcept;

/// Learnable per-component scales stored as unconstrained raw values,
/// sigma_m = softplus(raw_m).
struct UncertaintyLossState {
  std::vector<LossComponent> components;
  Tensor raw;  // [M]

  static UncertaintyLossState create(std::vector<LossComponent> components);
  std::size_t size() const noexcept { return components.size(); }
  std::vector<double> sigmas() const;
};

/// sum_m L_m / (2 sigma_m^2) + log(1 + sigma_m^2), with sigma = softplus(raw)
/// (raw: [M]). ArityMismatch when the counts differ; NonFinite when some
/// L_m is not finite.
Var uncertainty_aware_loss(std::span<const Var> components, Var raw);

/// [N, spatial...] integer labels -> [N, K, spatial...] one-hot tensor.
/// DomainError on a label >= K.
Tensor one_hot(std::span<const std::uint8_t> labels, const Shape& label_shape, std::size_t n_classes);

}  // namespace sharpseg
