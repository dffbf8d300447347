#include "sharpseg/losses.hpp"

#include <cmath>

#include "sharpseg/error.hpp"
#include "sharpseg/ops.hpp"

namespace sharpseg {

namespace {

void check_pair(const Var& p, const Var& g, const char* what) {
  if (p.shape() != g.shape()) {
    fail(ErrorCode::ShapeMismatch,
         std::string(what) + ": prediction " + shape_str(p.shape()) + " vs target " + shape_str(g.shape()));
  }
  if (p.shape().size() < 3) fail(ErrorCode::ShapeMismatch, std::string(what) + " expects [N, K, spatial...]");
}

std::size_t pixel_count(const Var& p) { return p.size() / p.shape()[1]; }

// Per-class totals over batch and space: [N, K, S...] -> [K].
Var class_totals(Var x) {
  const Shape s = x.shape();
  const std::size_t N = s[0], K = s[1], S = x.size() / (N * K);
  return sum_axis(sum_axis(reshape(x, {N, K, S}), 2), 0);
}

Var log_prob(Var p) { return log(clamp(p, kProbFloor, 1.0)); }

}  // namespace

Var dice_loss(Var p, Var g, double smooth) {
  check_pair(p, g, "dice_loss");
  for (double v : p.value().data()) {
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) fail(ErrorCode::DomainError, "dice_loss probability outside [0, 1]");
  }
  const std::size_t K = p.shape()[1];
  if (K < 2) fail(ErrorCode::ShapeMismatch, "dice_loss needs a background and at least one foreground class");
  const Var inter = class_totals(mul(p, g));
  const Var denom = add_scalar(add(class_totals(p), class_totals(g)), smooth);
  const Var dsc = div(add_scalar(mul_scalar(inter, 2.0), smooth), denom);
  const Var fg = slice(dsc, 0, 1, K);
  return add_scalar(neg(mean(fg)), 1.0);
}

Var ce_loss(Var p, Var g) {
  check_pair(p, g, "ce_loss");
  return mul_scalar(sum(mul(g, log_prob(p))), -1.0 / static_cast<double>(pixel_count(p)));
}

Var focal_loss(Var p, Var g, const FocalConfig& cfg) {
  if (!std::isfinite(cfg.gamma) || cfg.gamma < 0.0) fail(ErrorCode::InvalidConfig, "focal gamma must be finite and >= 0");
  if (cfg.gamma == 0.0) return ce_loss(p, g);
  check_pair(p, g, "focal_loss");
  const Var pc = clamp(p, kProbFloor, 1.0);
  const Var weight = pow(add_scalar(neg(pc), 1.0), cfg.gamma);
  return mul_scalar(sum(mul(weight, mul(g, log(pc)))), -1.0 / static_cast<double>(pixel_count(p)));
}

const char* component_name(LossComponent c) noexcept {
  switch (c) {
    case LossComponent::Dice: return "dice";
    case LossComponent::CrossEntropy: return "ce";
    case LossComponent::Focal: return "focal";
  }
  return "?";
}

LossComponent parse_component(const std::string& name) {
  if (name == "dice") return LossComponent::Dice;
  if (name == "ce") return LossComponent::CrossEntropy;
  if (name == "focal") return LossComponent::Focal;
  fail(ErrorCode::InvalidConfig, "unknown loss component '" + name + "'");
}

Var component_loss(LossComponent c, Var p, Var g, const FocalConfig& focal) {
  switch (c) {
    case LossComponent::Dice: return dice_loss(p, g);
    case LossComponent::CrossEntropy: return ce_loss(p, g);
    case LossComponent::Focal: return focal_loss(p, g, focal);
  }
  fail(ErrorCode::InvalidConfig, "unknown loss component");
}

double sigma_raw_for_unit_sigma() noexcept { return std::log(std::exp(1.0) - 1.0); }

UncertaintyLossState UncertaintyLossState::create(std::vector<LossComponent> components) {
  if (components.empty()) fail(ErrorCode::InvalidConfig, "uncertainty loss needs at least one component");
  UncertaintyLossState s;
  s.raw = Tensor({components.size()}, sigma_raw_for_unit_sigma());
  s.components = std::move(components);
  return s;
}

std::vector<double> UncertaintyLossState::sigmas() const {
  std::vector<double> out;
  for (double r : raw.data()) out.push_back(r > 30.0 ? r : std::log1p(std::exp(r)));
  return out;
}

Var uncertainty_aware_loss(std::span<const Var> components, Var raw) {
  if (raw.shape().size() != 1 || components.size() != raw.shape()[0]) {
    fail(ErrorCode::ArityMismatch, std::to_string(components.size()) + " losses for " + shape_str(raw.shape()) +
                                       " sigma parameters");
  }
  const Var sigma = softplus(raw);
  const Var var = mul(sigma, sigma);
  Var total;
  for (std::size_t m = 0; m < components.size(); ++m) {
    const Var& L = components[m];
    if (L.size() != 1 || !std::isfinite(L.value()[0])) {
      fail(ErrorCode::NonFinite, "loss component " + std::to_string(m) + " is not a finite scalar");
    }
    const Var v = slice(var, 0, m, m + 1);
    const Var term = add(div(L, mul_scalar(v, 2.0)), log(add_scalar(v, 1.0)));
    total = total.valid() ? add(total, term) : term;
  }
  return sum(total);
}

Tensor one_hot(std::span<const std::uint8_t> labels, const Shape& label_shape, std::size_t n_classes) {
  if (label_shape.empty() || numel(label_shape) != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "label buffer does not match " + shape_str(label_shape));
  }
  const std::size_t N = label_shape[0], S = labels.size() / N;
  Shape out_shape{N, n_classes};
  out_shape.insert(out_shape.end(), label_shape.begin() + 1, label_shape.end());
  Tensor out(out_shape, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < S; ++i) {
      const std::size_t k = labels[n * S + i];
      if (k >= n_classes) fail(ErrorCode::DomainError, "label " + std::to_string(k) + " >= class count");
      out[(n * n_classes + k) * S + i] = 1.0;
    }
  }
  return out;
}

}  // namespace sharpseg
