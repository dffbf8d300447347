#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "sharpseg/graph.hpp"

namespace sharpseg {

/// Builds a scalar loss in the given graph. Must register each checked
/// tensor through Graph::parameter() and be deterministic.
using ScalarFn = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double h = 1e-6;
  /// 0 probes every entry; otherwise a seeded sample of this many entries
  /// per tensor (used for network-sized parameter sets).
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

/// Max over probed entries of |analytic - central difference| /
/// max(1, |central difference|). Leaves values untouched and restores the
/// tensors' gradient buffers. InvalidAttr unless 0 < h <= 1e-3; NonFinite
/// when f is not finite at a probe point.
double grad_check(const ScalarFn& f, std::span<Tensor* const> params, const GradCheckOptions& options);
double grad_check(const ScalarFn& f, std::span<Tensor* const> params, double h = 1e-6);

}  // namespace sharpseg

#include <vector>

namespace sharpseg {

/// Op kinds reachable through forward_primitive().
std::vector<OpKind> differentiable_primitives();

/// Draws a random small instance of `kind` (shapes, attributes, values all
/// from `seed`), contracts its output with a random weight tensor and
/// returns grad_check's error over every input.
double audit_primitive(OpKind kind, std::uint64_t seed);

}  // namespace sharpseg
