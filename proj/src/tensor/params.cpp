#include "sharpseg/params.hpp"

#include <algorithm>

namespace sharpseg {

std::size_t ParameterStore::add(std::string name, Tensor init) {
  if (contains(name)) fail(ErrorCode::InvalidConfig, "duplicate parameter name " + name);
  init.set_requires_grad(true);
  entries_.push_back({std::move(name), std::move(init)});
  return entries_.size() - 1;
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

Tensor& ParameterStore::at(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  fail(ErrorCode::InvalidConfig, "no parameter named " + name);
}

const Tensor& ParameterStore::at(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

ParamList ParameterStore::refs() {
  ParamList out;
  out.reserve(entries_.size());
  for (auto& e : entries_) out.push_back({e.name, &e.tensor});
  return out;
}

void ParameterStore::assign(std::span<const NamedTensor> source) {
  for (const auto& src : source) {
    Tensor& dst = at(src.name);
    if (dst.shape() != src.tensor.shape()) {
      fail(ErrorCode::ShapeMismatch, "parameter " + src.name + " has shape " + shape_str(dst.shape()) +
                                         ", source has " + shape_str(src.tensor.shape()));
    }
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), dst.data().begin());
  }
}

Var ParamBinder::operator()(std::size_t index) {
  if (index >= store_.size()) fail(ErrorCode::InvalidConfig, "parameter index out of range");
  if (bound_.size() < store_.size()) bound_.resize(store_.size());
  if (!bound_[index].valid()) bound_[index] = graph_.parameter(store_[index]);
  return bound_[index];
}

}  // namespace sharpseg
