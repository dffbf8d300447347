#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "sharpseg/params.hpp"

namespace sharpseg {

/// He-uniform draw for a tensor whose fan-in is the product of all but the
/// leading extent (or all but the two leading extents for transposed convs).
Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

struct MambaConfig {
  std::size_t channels = 8;
  std::size_t expand = 2;
  std::size_t n_state = 4;
  /// Input-dependent b_t, c_t projected from the branch input.
  bool selective = true;
};

/// Two-branch block over flattened raster-order sequences:
/// LN -> (proj -> scan) * silu(proj) -> out_proj, reshaped back.
class MambaBlock {
 public:
  static MambaBlock create(ParameterStore& store, const std::string& prefix, const MambaConfig& cfg,
                           std::mt19937_64& rng);

  /// x: [N, C, spatial...] -> same shape.
  Var forward(ParamBinder& bind, Var x) const;

  const MambaConfig& config() const noexcept { return cfg_; }
  std::size_t out_proj_index() const noexcept { return out_proj_; }

 private:
  MambaConfig cfg_;
  std::size_t ln_gamma_ = 0, ln_beta_ = 0, in_x_ = 0, in_z_ = 0;
  std::size_t a_logit_ = 0, b_ = 0, c_ = 0, d_ = 0, out_proj_ = 0;
};

/// out = skip(x) + lrelu(IN(conv3(x))), skip is identity or a 1x1 conv
/// when the channel count changes.
class ResidualBlock {
 public:
  static ResidualBlock create(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                              std::size_t out_channels, std::size_t spatial_rank, std::mt19937_64& rng);

  Var forward(ParamBinder& bind, Var x) const;

  std::size_t conv_index() const noexcept { return conv_; }
  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  std::size_t conv_ = 0, gamma_ = 0, beta_ = 0;
  std::size_t skip_ = 0;
  bool has_skip_conv_ = false;
};

/// Two residual blocks followed by a residual Mamba block.
class UMambaBlock {
 public:
  static UMambaBlock create(ParameterStore& store, const std::string& prefix, std::size_t in_channels,
                            std::size_t out_channels, std::size_t spatial_rank, const MambaConfig& mamba,
                            std::mt19937_64& rng);

  Var forward(ParamBinder& bind, Var x) const;

  const ResidualBlock& residual(std::size_t i) const { return i == 0 ? res1_ : res2_; }
  const MambaBlock& mamba() const noexcept { return mamba_; }

 private:
  ResidualBlock res1_, res2_;
  MambaBlock mamba_;
};

}  // namespace sharpseg
