#pragma once

#include <span>
#include <string>
#include <vector>

#include "sharpseg/graph.hpp"
#include "sharpseg/tensor.hpp"

namespace sharpseg {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Non-owning view of a trainable tensor, as handed to optimizers.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

using ParamList = std::vector<ParamRef>;

/// Ordered, named collection of trainable tensors. Index order is the
/// registration order and defines flattening order everywhere.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const noexcept { return entries_.size(); }
  Tensor& operator[](std::size_t i) { return entries_[i].tensor; }
  const Tensor& operator[](std::size_t i) const { return entries_[i].tensor; }
  const std::string& name(std::size_t i) const { return entries_[i].name; }

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::span<NamedTensor> entries() noexcept { return entries_; }
  std::span<const NamedTensor> entries() const noexcept { return entries_; }

  /// Total scalar count.
  std::size_t scalar_count() const noexcept;
  void zero_grad();
  ParamList refs();

  /// Overwrites values from `source` by name; shapes must match.
  void assign(std::span<const NamedTensor> source);

 private:
  std::vector<NamedTensor> entries_;
};

/// Binds store entries into one graph lazily, each at most once.
class ParamBinder {
 public:
  ParamBinder(Graph& graph, ParameterStore& store) : graph_(graph), store_(store), bound_(store.size()) {}

  Var operator()(std::size_t index);
  Graph& graph() noexcept { return graph_; }
  ParameterStore& store() noexcept { return store_; }

 private:
  Graph& graph_;
  ParameterStore& store_;
  std::vector<Var> bound_;
};

}  // namespace sharpseg
