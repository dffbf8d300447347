#include "sharpseg/blocks.hpp"

#include <cmath>

#include "sharpseg/error.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/ssm.hpp"

namespace sharpseg {

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

namespace {

Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor linear_init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return uniform({in, out}, -bound, bound, rng);
}

}  // namespace

MambaBlock MambaBlock::create(ParameterStore& store, const std::string& prefix, const MambaConfig& cfg,
                              std::mt19937_64& rng) {
  if (cfg.channels == 0 || cfg.expand == 0 || cfg.n_state == 0) {
    fail(ErrorCode::InvalidConfig, prefix + ": mamba widths must be positive");
  }
  const std::size_t C = cfg.channels, E = C * cfg.expand, S = cfg.n_state;
  MambaBlock m;
  m.cfg_ = cfg;
  m.ln_gamma_ = store.add(prefix + ".ln.gamma", Tensor({C}, 1.0));
  m.ln_beta_ = store.add(prefix + ".ln.beta", Tensor({C}, 0.0));
  m.in_x_ = store.add(prefix + ".in_x", linear_init(C, E, rng));
  m.in_z_ = store.add(prefix + ".in_z", linear_init(C, E, rng));
  // Decays sigmoid(logit) spread over roughly [0.5, 0.95].
  Tensor logit({E, S});
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t s = 0; s < S; ++s) {
      const double decay = 0.5 + 0.45 * (S == 1 ? 0.5 : static_cast<double>(s) / static_cast<double>(S - 1));
      logit[e * S + s] = std::log(decay / (1.0 - decay));
    }
  }
  m.a_logit_ = store.add(prefix + ".a_logit", std::move(logit));
  if (cfg.selective) {
    m.b_ = store.add(prefix + ".b_proj", linear_init(E, S, rng));
    m.c_ = store.add(prefix + ".c_proj", linear_init(E, S, rng));
  } else {
    m.b_ = store.add(prefix + ".b", uniform({E, S}, -0.5, 0.5, rng));
    m.c_ = store.add(prefix + ".c", uniform({E, S}, -0.5, 0.5, rng));
  }
  m.d_ = store.add(prefix + ".d", Tensor({E}, 1.0));
  m.out_proj_ = store.add(prefix + ".out_proj", linear_init(E, C, rng));
  return m;
}

Var MambaBlock::forward(ParamBinder& bind, Var x) const {
  const Shape shape = x.shape();
  if (shape.size() < 3 || shape[1] != cfg_.channels) {
    fail(ErrorCode::ShapeMismatch, "mamba block expects [N, " + std::to_string(cfg_.channels) + ", ...], got " +
                                       shape_str(shape));
  }
  const std::size_t N = shape[0], C = cfg_.channels, E = C * cfg_.expand;
  std::size_t T = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) T *= shape[i];

  const Var seq = reshape(transpose(reshape(x, {N, C, T}), {0, 2, 1}), {N * T, C});
  const Var normed = layer_norm(seq, bind(ln_gamma_), bind(ln_beta_));
  const Var u = matmul(normed, bind(in_x_));
  const Var gate = silu(matmul(normed, bind(in_z_)));

  Var b = bind(b_), c = bind(c_);
  if (cfg_.selective) {
    b = reshape(matmul(u, b), {N, T, cfg_.n_state});
    c = reshape(matmul(u, c), {N, T, cfg_.n_state});
  }
  const Var y = channel_scan(reshape(u, {N, T, E}), sigmoid(bind(a_logit_)), b, c, bind(d_));
  const Var merged = mul(reshape(y, {N * T, E}), gate);
  const Var out = matmul(merged, bind(out_proj_));
  return reshape(transpose(reshape(out, {N, T, C}), {0, 2, 1}), shape);
}

ResidualBlock ResidualBlock::create(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                                    std::size_t out_channels, std::size_t spatial_rank, std::mt19937_64& rng) {
  if (spatial_rank < 1 || spatial_rank > 3) fail(ErrorCode::InvalidConfig, prefix + ": spatial rank must be 1..3");
  if (in_channels == 0 || out_channels == 0) fail(ErrorCode::InvalidConfig, prefix + ": channels must be positive");
  ResidualBlock r;
  r.in_ = in_channels;
  r.out_ = out_channels;
  Shape kshape{out_channels, in_channels};
  std::size_t fan_in = in_channels;
  for (std::size_t i = 0; i < spatial_rank; ++i) {
    kshape.push_back(3);
    fan_in *= 3;
  }
  r.conv_ = store.add(prefix + ".conv", he_uniform(kshape, fan_in, rng));
  r.gamma_ = store.add(prefix + ".norm.gamma", Tensor({out_channels}, 1.0));
  r.beta_ = store.add(prefix + ".norm.beta", Tensor({out_channels}, 0.0));
  if (in_channels != out_channels) {
    Shape sshape{out_channels, in_channels};
    sshape.resize(2 + spatial_rank, 1);
    r.skip_ = store.add(prefix + ".skip", he_uniform(sshape, in_channels, rng));
    r.has_skip_conv_ = true;
  }
  return r;
}

Var ResidualBlock::forward(ParamBinder& bind, Var x) const {
  if (x.shape().size() < 3 || x.shape()[1] != in_) {
    fail(ErrorCode::ShapeMismatch,
         "residual block expects " + std::to_string(in_) + " channels, got " + shape_str(x.shape()));
  }
  const Var body = leaky_relu(instance_norm(conv(x, bind(conv_), ConvAttrs{{1}, {1}}), bind(gamma_), bind(beta_)));
  const Var skip = has_skip_conv_ ? conv(x, bind(skip_)) : x;
  return add(skip, body);
}

UMambaBlock UMambaBlock::create(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                                std::size_t out_channels, std::size_t spatial_rank, const MambaConfig& mamba,
                                std::mt19937_64& rng) {
  UMambaBlock b;
  b.res1_ = ResidualBlock::create(store, prefix + ".res1", in_channels, out_channels, spatial_rank, rng);
  b.res2_ = ResidualBlock::create(store, prefix + ".res2", out_channels, out_channels, spatial_rank, rng);
  MambaConfig mc = mamba;
  mc.channels = out_channels;
  b.mamba_ = MambaBlock::create(store, prefix + ".mamba", mc, rng);
  return b;
}

Var UMambaBlock::forward(ParamBinder& bind, Var x) const {
  const Var h = res2_.forward(bind, res1_.forward(bind, x));
  return add(h, mamba_.forward(bind, h));
}

}  // namespace sharpseg
