#include "sharpseg/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "sharpseg/binary_io.hpp"
#include "sharpseg/error.hpp"

namespace sharpseg {

using nlohmann::json;

namespace {

Direction draw(const ParamList& weights, std::mt19937_64& rng, std::size_t& zero_filters) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Direction d;
  for (const auto& p : weights) {
    Tensor t(p.tensor->shape());
    if (p.tensor->rank() >= 2) {
      const std::size_t filters = p.tensor->extent(0);
      const std::size_t width = p.tensor->size() / filters;
      for (std::size_t f = 0; f < filters; ++f) {
        double wn = 0.0, dn = 0.0;
        for (std::size_t k = f * width; k < (f + 1) * width; ++k) {
          t[k] = normal(rng);
          wn += (*p.tensor)[k] * (*p.tensor)[k];
          dn += t[k] * t[k];
        }
        wn = std::sqrt(wn);
        dn = std::sqrt(dn);
        const double scale = (wn == 0.0 || dn == 0.0) ? 0.0 : wn / dn;
        if (wn == 0.0) ++zero_filters;
        for (std::size_t k = f * width; k < (f + 1) * width; ++k) t[k] *= scale;
      }
    }
    d.push_back({p.name, std::move(t)});
  }
  return d;
}

std::vector<Tensor> snapshot(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(*p.tensor);
  return out;
}

void restore(const ParamList& params, const std::vector<Tensor>& saved) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(saved[i].data().begin(), saved[i].data().end(), params[i].tensor->data().begin());
  }
}

void check_directions(const ParamList& params, const DirectionPair& dirs) {
  if (dirs.d1.size() != params.size() || dirs.d2.size() != params.size()) {
    fail(ErrorCode::ShapeMismatch, "directions cover " + std::to_string(dirs.d1.size()) + " tensors, model has " +
                                       std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (dirs.d1[i].tensor.shape() != params[i].tensor->shape() ||
        dirs.d2[i].tensor.shape() != params[i].tensor->shape()) {
      fail(ErrorCode::ShapeMismatch, "direction shape differs for " + params[i].name);
    }
  }
}

double safe_loss(LossModel& model, bool& finite) {
  double v = std::numeric_limits<double>::quiet_NaN();
  try {
    v = model.loss();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFinite) throw;
  }
  finite = std::isfinite(v);
  return finite ? v : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

DirectionPair sample_directions(const ParamList& weights, std::uint64_t seed) {
  DirectionPair out;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  out.d1 = draw(weights, rng, out.zero_weight_filters);
  std::size_t ignored = 0;
  out.d2 = draw(weights, rng, ignored);
  const double d11 = dot(out.d1, out.d1);
  if (d11 > 0.0) {
    const double c = dot(out.d2, out.d1) / d11;
    for (std::size_t i = 0; i < out.d2.size(); ++i) {
      auto a = out.d2[i].tensor.data();
      const auto b = out.d1[i].tensor.data();
      for (std::size_t k = 0; k < a.size(); ++k) a[k] -= c * b[k];
    }
  }
  return out;
}

double dot(const Direction& a, const Direction& b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "directions differ in tensor count");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a[i].tensor.data();
    const auto y = b[i].tensor.data();
    if (x.size() != y.size()) fail(ErrorCode::ShapeMismatch, "direction sizes differ for " + a[i].name);
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  }
  return s;
}

LandscapeGrid evaluate_grid(LossModel& model, const DirectionPair& dirs, double extent, std::size_t steps,
                            std::size_t workers) {
  if (steps == 0 || steps % 2 == 0) fail(ErrorCode::InvalidAttr, "steps must be odd, got " + std::to_string(steps));
  if (!(extent >= 0.0) || !std::isfinite(extent)) fail(ErrorCode::InvalidAttr, "extent must be finite and >= 0");
  ParamList params = model.parameters();
  check_directions(params, dirs);

  LandscapeGrid grid;
  grid.direction_seed = dirs.seed;
  const std::size_t mid = steps / 2;
  for (std::size_t i = 0; i < steps; ++i) {
    // Exact zero at the centre and exact +-extent at the ends.
    const double v = i == mid ? 0.0 : extent * (static_cast<double>(i) - static_cast<double>(mid)) / static_cast<double>(mid);
    grid.alphas.push_back(v);
  }
  grid.betas = grid.alphas;
  grid.losses.assign(steps * steps, 0.0);
  std::vector<char> finite(steps * steps, 0);
  const std::vector<Tensor> theta = snapshot(params);

  auto run = [&](LossModel& m, std::size_t first, std::size_t stride) {
    ParamList ps = m.parameters();
    for (std::size_t cell = first; cell < steps * steps; cell += stride) {
      const double a = grid.alphas[cell / steps];
      const double b = grid.betas[cell % steps];
      for (std::size_t t = 0; t < ps.size(); ++t) {
        auto dst = ps[t].tensor->data();
        const auto th = theta[t].data();
        if (a == 0.0 && b == 0.0) {
          std::copy(th.begin(), th.end(), dst.begin());
          continue;
        }
        const auto x = dirs.d1[t].tensor.data();
        const auto y = dirs.d2[t].tensor.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = th[k] + a * x[k] + b * y[k];
      }
      bool ok = false;
      grid.losses[cell] = safe_loss(m, ok);
      finite[cell] = ok ? 1 : 0;
    }
    restore(ps, theta);
  };

  workers = std::max<std::size_t>(1, std::min(workers, steps * steps));
  try {
    if (workers == 1) {
      run(model, 0, 1);
    } else {
      std::vector<std::unique_ptr<LossModel>> clones;
      for (std::size_t w = 0; w < workers; ++w) clones.push_back(model.clone());
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            run(*clones[w], w, workers);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
  } catch (...) {
    restore(params, theta);
    throw;
  }
  restore(params, theta);
  grid.finite.assign(finite.begin(), finite.end());
  grid.center_loss = grid.at(mid, mid);
  return grid;
}

double flatness_range(const LandscapeGrid& grid, double radius) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
    for (std::size_t j = 0; j < grid.betas.size(); ++j) {
      const double r2 = grid.alphas[i] * grid.alphas[i] + grid.betas[j] * grid.betas[j];
      if (r2 > radius * radius * (1.0 + 1e-12) || !grid.finite[i * grid.betas.size() + j]) continue;
      lo = std::min(lo, grid.at(i, j));
      hi = std::max(hi, grid.at(i, j));
    }
  }
  if (hi < lo) fail(ErrorCode::NonFinite, "no finite cell within the radius");
  return hi - lo;
}

double sharpness_proxy(LossModel& model, double rho, std::size_t n_directions, std::uint64_t seed) {
  if (!(rho > 0.0)) fail(ErrorCode::InvalidAttr, "rho must be positive");
  ParamList params = model.parameters();
  const std::vector<Tensor> theta = snapshot(params);
  const double base = model.loss();
  if (!std::isfinite(base)) fail(ErrorCode::NonFinite, "loss is not finite at the unperturbed point");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  try {
    for (std::size_t d = 0; d < n_directions; ++d) {
      std::vector<std::vector<double>> u;
      double norm2 = 0.0;
      for (const auto& p : params) {
        std::vector<double> v(p.tensor->size());
        for (double& x : v) {
          x = normal(rng);
          norm2 += x * x;
        }
        u.push_back(std::move(v));
      }
      const double scale = rho / std::sqrt(norm2);
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto dst = params[t].tensor->data();
        const auto th = theta[t].data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = th[k] + scale * u[t][k];
      }
      const double l = model.loss();
      worst = std::max(worst, std::isfinite(l) ? l - base : std::numeric_limits<double>::infinity());
    }
  } catch (...) {
    restore(params, theta);
    throw;
  }
  restore(params, theta);
  return worst;
}

json LandscapeGrid::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < betas.size(); ++j) {
      if (finite[i * betas.size() + j]) {
        row.push_back(at(i, j));
      } else {
        row.push_back(nullptr);
      }
    }
    rows.push_back(row);
  }
  return {{"alphas", alphas},       {"betas", betas},
          {"losses", rows},         {"center_loss", center_loss},
          {"direction_seed", direction_seed}, {"config_hash", config_hash}};
}

std::string LandscapeGrid::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "alpha,beta,loss\n";
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    for (std::size_t j = 0; j < betas.size(); ++j) {
      os << alphas[i] << "," << betas[j] << ",";
      if (finite[i * betas.size() + j]) {
        os << at(i, j);
      } else {
        os << "nan";
      }
      os << "\n";
    }
  }
  return os.str();
}

std::string LandscapeGrid::to_pgm() const {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t c = 0; c < losses.size(); ++c) {
    if (!finite[c]) continue;
    lo = std::min(lo, losses[c]);
    hi = std::max(hi, losses[c]);
  }
  // Rows are beta (top = +extent), columns alpha.
  std::ostringstream os;
  os << "P5\n" << alphas.size() << " " << betas.size() << "\n255\n";
  for (std::size_t r = 0; r < betas.size(); ++r) {
    const std::size_t j = betas.size() - 1 - r;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const std::size_t c = i * betas.size() + j;
      unsigned char px = 255;
      if (finite[c]) px = hi > lo ? static_cast<unsigned char>(std::lround(255.0 * (losses[c] - lo) / (hi - lo))) : 0;
      os.put(static_cast<char>(px));
    }
  }
  return os.str();
}

void write_landscape(const LandscapeGrid& grid, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  io::write_text(dir / "landscape.csv", grid.to_csv());
  io::write_text(dir / "landscape.json", grid.to_json().dump(2) + "\n");
  io::write_text(dir / "landscape.pgm", grid.to_pgm());
}

}  // namespace sharpseg
