#include <cmath>
#include <random>

#include "sharpseg/gradcheck.hpp"
#include "sharpseg/ops.hpp"

namespace sharpseg {

std::vector<OpKind> differentiable_primitives() {
  return {OpKind::MatMul,    OpKind::Add,          OpKind::Sub,       OpKind::Mul,
          OpKind::Div,       OpKind::Exp,          OpKind::Log,       OpKind::Neg,
          OpKind::Pow,       OpKind::Sigmoid,      OpKind::Softplus,  OpKind::LeakyRelu,
          OpKind::Clamp,     OpKind::Softmax,      OpKind::InstanceNorm, OpKind::LayerNorm,
          OpKind::Conv,      OpKind::TransposedConv, OpKind::BiasAdd, OpKind::Sum,
          OpKind::Mean,      OpKind::SumAxis,      OpKind::Slice,     OpKind::Concat,
          OpKind::Reshape,   OpKind::Transpose};
}

namespace {

class CaseBuilder {
 public:
  explicit CaseBuilder(std::uint64_t seed) : rng_(seed) {}

  std::size_t extent(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  Shape shape(std::size_t min_rank, std::size_t max_rank, std::size_t lo = 1, std::size_t hi = 4) {
    Shape s(extent(min_rank, max_rank));
    for (auto& e : s) e = extent(lo, hi);
    return s;
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Tensor tensor(Shape s, double lo = -1.5, double hi = 1.5) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = uniform(lo, hi);
    return t;
  }

  /// Values kept at least `gap` away from each point in `kinks`.
  Tensor tensor_avoiding(Shape s, double lo, double hi, std::initializer_list<double> kinks, double gap = 0.05) {
    Tensor t = tensor(std::move(s), lo, hi);
    for (auto& v : t.data()) {
      for (double k : kinks) {
        if (std::abs(v - k) < gap) v = k + (v < k ? -gap : gap);
      }
    }
    return t;
  }

  bool coin() { return extent(0, 1) == 1; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

double audit_primitive(OpKind kind, std::uint64_t seed) {
  CaseBuilder cb(seed * 7919 + static_cast<std::uint64_t>(kind));
  std::vector<Tensor> inputs;
  OpAttrs attrs;
  switch (kind) {
    case OpKind::MatMul: {
      const auto m = cb.extent(1, 4), k = cb.extent(1, 4), n = cb.extent(1, 4);
      inputs = {cb.tensor({m, k}), cb.tensor({k, n})};
      break;
    }
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div: {
      Shape s = cb.shape(1, 3);
      Shape other = cb.coin() ? s : Shape{};
      Tensor a = cb.tensor(s);
      Tensor b = kind == OpKind::Div ? cb.tensor_avoiding(other, -2.0, 2.0, {0.0}, 0.5) : cb.tensor(other);
      if (kind != OpKind::Div && cb.coin()) std::swap(a, b);
      inputs = {std::move(a), std::move(b)};
      break;
    }
    case OpKind::Exp:
    case OpKind::Neg:
    case OpKind::Sigmoid:
    case OpKind::Softplus:
    case OpKind::Sum:
    case OpKind::Mean:
      inputs = {cb.tensor(cb.shape(1, 3), -2.0, 2.0)};
      break;
    case OpKind::Log:
      inputs = {cb.tensor(cb.shape(1, 3), 0.2, 3.0)};
      break;
    case OpKind::Pow: {
      static constexpr double exps[] = {2.0, 3.0, 0.5, 1.7, -1.0, 0.0};
      attrs.scalar = exps[cb.extent(0, 5)];
      inputs = {cb.tensor(cb.shape(1, 3), 0.3, 2.0)};
      break;
    }
    case OpKind::LeakyRelu:
      attrs.scalar = 0.01;
      inputs = {cb.tensor_avoiding(cb.shape(1, 3), -2.0, 2.0, {0.0})};
      break;
    case OpKind::Clamp:
      attrs.lo = -0.5;
      attrs.hi = 0.5;
      inputs = {cb.tensor_avoiding(cb.shape(1, 3), -1.0, 1.0, {-0.5, 0.5})};
      break;
    case OpKind::Softmax: {
      Shape s = cb.shape(1, 3);
      attrs.axis = static_cast<int>(cb.extent(0, s.size() - 1)) - (cb.coin() ? static_cast<int>(s.size()) : 0);
      inputs = {cb.tensor(s, -2.0, 2.0)};
      break;
    }
    case OpKind::InstanceNorm: {
      const auto n = cb.extent(1, 2), c = cb.extent(1, 3);
      Shape s{n, c};
      const auto rank = cb.extent(1, 2);
      for (std::size_t d = 0; d < rank; ++d) s.push_back(cb.extent(2, 4));
      attrs.scalar = 1e-5;
      inputs = {cb.tensor(s), cb.tensor({c}, 0.5, 1.5), cb.tensor({c})};
      break;
    }
    case OpKind::LayerNorm: {
      Shape s = cb.shape(0, 2);
      const auto c = cb.extent(2, 5);
      s.push_back(c);
      attrs.scalar = 1e-5;
      inputs = {cb.tensor(s), cb.tensor({c}, 0.5, 1.5), cb.tensor({c})};
      break;
    }
    case OpKind::Conv:
    case OpKind::TransposedConv: {
      const auto rank = cb.extent(1, 3);
      const auto n = cb.extent(1, 2), cin = cb.extent(1, 3), cout = cb.extent(1, 3);
      Shape xs{n, cin}, ws;
      ws = kind == OpKind::Conv ? Shape{cout, cin} : Shape{cin, cout};
      const auto stride = cb.extent(1, 2);
      const auto pad = kind == OpKind::Conv ? cb.extent(0, 1) : 0;
      for (std::size_t d = 0; d < rank; ++d) {
        const auto k = cb.extent(1, 3);
        ws.push_back(k);
        xs.push_back(cb.extent(std::max<std::size_t>(k, 2), rank == 3 ? 3 : 5));
      }
      attrs.conv.stride = {stride};
      attrs.conv.padding = {pad};
      inputs = {cb.tensor(xs), cb.tensor(ws)};
      break;
    }
    case OpKind::BiasAdd: {
      Shape s = cb.shape(1, 3);
      attrs.axis = static_cast<int>(cb.extent(0, s.size() - 1));
      inputs = {cb.tensor(s), cb.tensor({s[static_cast<std::size_t>(attrs.axis)]})};
      break;
    }
    case OpKind::SumAxis: {
      Shape s = cb.shape(1, 3);
      attrs.axis = static_cast<int>(cb.extent(0, s.size() - 1));
      inputs = {cb.tensor(s)};
      break;
    }
    case OpKind::Slice: {
      Shape s = cb.shape(1, 3, 2, 5);
      const auto axis = cb.extent(0, s.size() - 1);
      attrs.axis = static_cast<int>(axis);
      attrs.begin = cb.extent(0, s[axis] - 1);
      attrs.end = cb.extent(attrs.begin + 1, s[axis]);
      inputs = {cb.tensor(s)};
      break;
    }
    case OpKind::Concat: {
      Shape s = cb.shape(1, 3);
      const auto axis = cb.extent(0, s.size() - 1);
      attrs.axis = static_cast<int>(axis);
      const auto parts = cb.extent(2, 3);
      for (std::size_t p = 0; p < parts; ++p) {
        Shape sp = s;
        sp[axis] = cb.extent(1, 3);
        inputs.push_back(cb.tensor(sp));
      }
      break;
    }
    case OpKind::Reshape: {
      Shape s = cb.shape(1, 3);
      const std::size_t total = numel(s);
      attrs.shape = cb.coin() ? Shape{total} : Shape{1, total};
      inputs = {cb.tensor(s)};
      break;
    }
    case OpKind::Transpose: {
      Shape s = cb.shape(1, 4);
      std::vector<std::size_t> perm(s.size());
      for (std::size_t d = 0; d < perm.size(); ++d) perm[d] = d;
      for (std::size_t d = perm.size(); d-- > 1;) std::swap(perm[d], perm[cb.extent(0, d)]);
      attrs.perm = perm;
      inputs = {cb.tensor(s)};
      break;
    }
    case OpKind::Parameter:
    case OpKind::Constant:
    case OpKind::Scan:
      fail(ErrorCode::InvalidAttr, std::string(op_name(kind)) + " has no primitive audit");
  }

  Tensor weights;
  {
    Graph probe;
    std::vector<Var> vars;
    for (auto& t : inputs) vars.push_back(probe.constant(t));
    const Var out = forward_primitive(kind, vars, attrs);
    weights = cb.tensor(out.shape());
  }
  std::vector<Tensor*> params;
  for (auto& t : inputs) params.push_back(&t);
  ScalarFn f = [&](Graph& g) {
    std::vector<Var> vars;
    for (auto& t : inputs) vars.push_back(g.parameter(t));
    return sum(mul(forward_primitive(kind, vars, attrs), g.constant(weights)));
  };
  return grad_check(f, params, 1e-6);
}

}  // namespace sharpseg
