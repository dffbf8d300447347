#include "sharpseg/graph.hpp"

#include <algorithm>

namespace sharpseg {

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Parameter: return "parameter";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Neg: return "neg";
    case OpKind::Pow: return "pow";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softplus: return "softplus";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Clamp: return "clamp";
    case OpKind::Softmax: return "softmax";
    case OpKind::InstanceNorm: return "instance_norm";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Conv: return "conv";
    case OpKind::TransposedConv: return "transposed_conv";
    case OpKind::BiasAdd: return "bias_add";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SumAxis: return "sum_axis";
    case OpKind::Slice: return "slice";
    case OpKind::Concat: return "concat";
    case OpKind::Reshape: return "reshape";
    case OpKind::Transpose: return "transpose";
    case OpKind::Scan: return "scan";
  }
  return "unknown";
}

Graph& Var::graph() const {
  if (!graph_) fail(ErrorCode::DetachedNode, "handle is not attached to a graph");
  return *graph_;
}

const Tensor& Var::value() const { return graph().value(id_); }

Var Graph::parameter(Tensor& tensor) {
  if (!tensor.requires_grad()) tensor.set_requires_grad(true);
  Node node{OpKind::Parameter, {}, Tensor(), &tensor, true, nullptr, {}};
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  Node node{OpKind::Constant, {}, std::move(value), nullptr, false, nullptr, {}};
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Graph::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) fail(ErrorCode::DetachedNode, "input node does not precede output");
    needs = needs || nodes_[in].needs_grad;
  }
  Node node{kind, std::move(inputs), std::move(value), nullptr, needs,
            needs ? std::move(backward) : BackwardFn{}, {}};
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.bound ? *n.bound : n.value;
}

std::span<const double> Graph::grad(const Var& v) const {
  if (v.graph_ != this) fail(ErrorCode::DetachedNode, "handle belongs to another graph");
  return nodes_.at(v.id()).grad;
}

std::span<double> Graph::grad_accumulator(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) fail(ErrorCode::DetachedNode, "loss handle belongs to another graph");
  if (loss.size() != 1) fail(ErrorCode::NotScalar, "loss has shape " + shape_str(loss.shape()));
  if (swept_) fail(ErrorCode::InvalidAttr, "backward already ran on this graph");
  swept_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  grad_accumulator(loss.id())[0] = 1.0;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.bound) {
      std::span<double> dst = n.bound->grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
  }
}

}  // namespace sharpseg
