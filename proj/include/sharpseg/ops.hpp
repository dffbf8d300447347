#pragma once

#include <span>
#include <vector>

#include "sharpseg/graph.hpp"

namespace sharpseg {

/// Strides and symmetric zero padding per spatial axis. A single entry is
/// broadcast to every spatial axis.
struct ConvAttrs {
  std::vector<std::size_t> stride{1};
  std::vector<std::size_t> padding{0};
};

// Elementwise binary ops accept equal shapes, or one operand with a single
// element that is broadcast over the other.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var add_scalar(Var a, double c);
Var mul_scalar(Var a, double c);

Var exp(Var x);
Var log(Var x);  // NumericDomain on non-positive entries
Var neg(Var x);
Var pow(Var x, double exponent);
Var sigmoid(Var x);
Var softplus(Var x);
Var silu(Var x);
Var leaky_relu(Var x, double slope = 0.01);
Var clamp(Var x, double lo, double hi);

/// [m,k] x [k,n].
Var matmul(Var a, Var b);

/// Softmax along `axis` (negative counts from the end).
Var softmax(Var x, int axis = -1);

/// Per-(sample, channel) normalization over the spatial extents of an
/// [N, C, spatial...] tensor with per-channel affine gamma/beta.
Var instance_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// Normalization over the last axis with affine gamma/beta of that length.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// x: [N, Cin, s...], weight: [Cout, Cin, k...]; 1 to 3 spatial axes.
Var conv(Var x, Var weight, const ConvAttrs& attrs = {});

/// x: [N, Cin, s...], weight: [Cin, Cout, k...]; output extent per axis is
/// (s - 1) * stride - 2 * padding + k.
Var transposed_conv(Var x, Var weight, const ConvAttrs& attrs = {});

/// Adds bias[C] along `axis` of x (C == extent(axis)).
Var bias_add(Var x, Var bias, std::size_t axis);

Var sum(Var x);
Var mean(Var x);
/// Reduces one axis away.
Var sum_axis(Var x, std::size_t axis);

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);
Var reshape(Var x, Shape shape);
Var transpose(Var x, std::vector<std::size_t> perm);

/// Attribute bag for the generic dispatcher below.
struct OpAttrs {
  double scalar = 0.0;  // pow exponent, leaky slope, norm eps
  double lo = 0.0, hi = 1.0;
  int axis = -1;
  std::size_t begin = 0, end = 0;
  ConvAttrs conv;
  Shape shape;
  std::vector<std::size_t> perm;
};

/// Uniform entry point over the differentiable op kinds; validates arity
/// and forwards to the typed functions above.
Var forward_primitive(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs);

}  // namespace sharpseg
