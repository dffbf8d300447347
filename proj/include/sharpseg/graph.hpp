#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sharpseg/tensor.hpp"

namespace sharpseg {

enum class OpKind : std::uint8_t {
  Parameter,
  Constant,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Exp,
  Log,
  Neg,
  Pow,
  Sigmoid,
  Softplus,
  LeakyRelu,
  Clamp,
  Softmax,
  InstanceNorm,
  LayerNorm,
  Conv,
  TransposedConv,
  BiasAdd,
  Sum,
  Mean,
  SumAxis,
  Slice,
  Concat,
  Reshape,
  Transpose,
  Scan,
};

const char* op_name(OpKind kind) noexcept;

using NodeId = std::uint32_t;

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph& graph() const;
  NodeId id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

 private:
  friend class Graph;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

/// Define-by-run tape. Nodes are appended in evaluation order, so every
/// node's inputs precede it and a single reverse sweep is a valid
/// topological traversal.
class Graph {
 public:
  /// Called once during backward with the node's own id; reads
  /// upstream(self) and accumulates into grad_accumulator(input).
  using BackwardFn = std::function<void(Graph&, NodeId self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Binds a trainable tensor. Its value is read in place (no copy); on
  /// backward the node gradient is added into tensor.grad(). The tensor
  /// must outlive the graph and stay unchanged while the graph is used.
  Var parameter(Tensor& tensor);

  /// Detached input; never receives gradient.
  Var constant(Tensor value);

  /// Hook used by every primitive (and the sequential scan) to append a node.
  Var record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  /// Reverse sweep from a single-element loss. Throws NotScalar for larger
  /// outputs and DetachedNode for a handle from another graph. Parameter
  /// gradients accumulate; callers zero them between steps.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  const Tensor& value(NodeId id) const;
  bool needs_grad(NodeId id) const { return nodes_.at(id).needs_grad; }
  bool needs_grad(const Var& v) const { return needs_grad(v.id()); }

  /// Gradient of the loss w.r.t. a node after backward (empty when the node
  /// does not depend on any parameter).
  std::span<const double> grad(const Var& v) const;

  // For backward functions.
  std::span<const double> upstream(NodeId self) const { return nodes_[self].grad; }
  std::span<double> grad_accumulator(NodeId id);

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor* bound = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace sharpseg
