#include "sharpseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sharpseg {

namespace {

double evaluate(const ScalarFn& f) {
  Graph g;
  const double v = f(g).item();
  if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "function value is not finite at probe point");
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, std::span<Tensor* const> params, const GradCheckOptions& options) {
  const double h = options.h;
  if (!(h > 0.0 && h <= 1e-3)) fail(ErrorCode::InvalidAttr, "grad_check step must lie in (0, 1e-3]");

  std::vector<std::vector<double>> saved_grads;
  for (Tensor* p : params) {
    if (!p->requires_grad()) p->set_requires_grad(true);
    saved_grads.emplace_back(p->grad().begin(), p->grad().end());
    p->zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    Var loss = f(g);
    if (!std::isfinite(loss.item())) fail(ErrorCode::NonFinite, "function value is not finite");
    g.backward(loss);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    analytic.emplace_back(params[k]->grad().begin(), params[k]->grad().end());
    std::copy(saved_grads[k].begin(), saved_grads[k].end(), params[k]->grad().begin());
  }

  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    std::vector<std::size_t> probe(p.size());
    std::iota(probe.begin(), probe.end(), 0);
    if (options.max_entries_per_tensor > 0 && probe.size() > options.max_entries_per_tensor) {
      std::shuffle(probe.begin(), probe.end(), rng);
      probe.resize(options.max_entries_per_tensor);
    }
    for (std::size_t i : probe) {
      const double orig = p[i];
      p[i] = orig + h;
      double fp = 0.0, fm = 0.0;
      try {
        fp = evaluate(f);
        p[i] = orig - h;
        fm = evaluate(f);
      } catch (...) {
        p[i] = orig;
        throw;
      }
      p[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const ScalarFn& f, std::span<Tensor* const> params, double h) {
  GradCheckOptions options;
  options.h = h;
  return grad_check(f, params, options);
}

}  // namespace sharpseg
