#include <string>

#include "sharpseg/ops.hpp"

namespace sharpseg {

namespace {

void expect_arity(OpKind kind, std::span<const Var> inputs, std::size_t n) {
  if (inputs.size() != n) {
    fail(ErrorCode::InvalidAttr, std::string(op_name(kind)) + " takes " + std::to_string(n) + " inputs, got " +
                                     std::to_string(inputs.size()));
  }
}

}  // namespace

Var forward_primitive(OpKind kind, std::span<const Var> in, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::MatMul: expect_arity(kind, in, 2); return matmul(in[0], in[1]);
    case OpKind::Add: expect_arity(kind, in, 2); return add(in[0], in[1]);
    case OpKind::Sub: expect_arity(kind, in, 2); return sub(in[0], in[1]);
    case OpKind::Mul: expect_arity(kind, in, 2); return mul(in[0], in[1]);
    case OpKind::Div: expect_arity(kind, in, 2); return div(in[0], in[1]);
    case OpKind::Exp: expect_arity(kind, in, 1); return exp(in[0]);
    case OpKind::Log: expect_arity(kind, in, 1); return log(in[0]);
    case OpKind::Neg: expect_arity(kind, in, 1); return neg(in[0]);
    case OpKind::Pow: expect_arity(kind, in, 1); return pow(in[0], attrs.scalar);
    case OpKind::Sigmoid: expect_arity(kind, in, 1); return sigmoid(in[0]);
    case OpKind::Softplus: expect_arity(kind, in, 1); return softplus(in[0]);
    case OpKind::LeakyRelu: expect_arity(kind, in, 1); return leaky_relu(in[0], attrs.scalar);
    case OpKind::Clamp: expect_arity(kind, in, 1); return clamp(in[0], attrs.lo, attrs.hi);
    case OpKind::Softmax: expect_arity(kind, in, 1); return softmax(in[0], attrs.axis);
    case OpKind::InstanceNorm: expect_arity(kind, in, 3); return instance_norm(in[0], in[1], in[2], attrs.scalar);
    case OpKind::LayerNorm: expect_arity(kind, in, 3); return layer_norm(in[0], in[1], in[2], attrs.scalar);
    case OpKind::Conv: expect_arity(kind, in, 2); return conv(in[0], in[1], attrs.conv);
    case OpKind::TransposedConv: expect_arity(kind, in, 2); return transposed_conv(in[0], in[1], attrs.conv);
    case OpKind::BiasAdd:
      expect_arity(kind, in, 2);
      if (attrs.axis < 0) fail(ErrorCode::InvalidAttr, "bias_add needs a non-negative axis");
      return bias_add(in[0], in[1], static_cast<std::size_t>(attrs.axis));
    case OpKind::Sum: expect_arity(kind, in, 1); return sum(in[0]);
    case OpKind::Mean: expect_arity(kind, in, 1); return mean(in[0]);
    case OpKind::SumAxis:
      expect_arity(kind, in, 1);
      if (attrs.axis < 0) fail(ErrorCode::InvalidAttr, "sum_axis needs a non-negative axis");
      return sum_axis(in[0], static_cast<std::size_t>(attrs.axis));
    case OpKind::Slice:
      expect_arity(kind, in, 1);
      if (attrs.axis < 0) fail(ErrorCode::InvalidAttr, "slice needs a non-negative axis");
      return slice(in[0], static_cast<std::size_t>(attrs.axis), attrs.begin, attrs.end);
    case OpKind::Concat:
      if (attrs.axis < 0) fail(ErrorCode::InvalidAttr, "concat needs a non-negative axis");
      return concat(in, static_cast<std::size_t>(attrs.axis));
    case OpKind::Reshape: expect_arity(kind, in, 1); return reshape(in[0], attrs.shape);
    case OpKind::Transpose: expect_arity(kind, in, 1); return transpose(in[0], attrs.perm);
    case OpKind::Parameter:
    case OpKind::Constant:
    case OpKind::Scan:
      break;
  }
  fail(ErrorCode::InvalidAttr, std::string(op_name(kind)) + " is not dispatchable");
}

}  // namespace sharpseg
