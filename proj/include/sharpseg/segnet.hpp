#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sharpseg/blocks.hpp"

namespace sharpseg {

struct NetworkConfig {
  std::size_t n_stages = 3;
  std::vector<std::size_t> channels{8, 16, 32};
  /// Downsampling factor entering each stage; strides[0] must be 1.
  std::vector<std::size_t> strides{1, 2, 2};
  /// Spatial extents of the input, 2 or 3 axes.
  std::vector<std::size_t> input_shape{64, 64};
  std::size_t in_channels = 1;
  std::size_t n_classes = 4;
  bool deep_supervision = true;
  bool selective_ssm = true;
  std::size_t n_state = 4;
  std::size_t expand = 2;
  std::size_t umamba_blocks_per_stage = 1;

  /// InvalidConfig with the offending field on failure.
  void validate() const;

  nlohmann::json to_json() const;
  /// Strict: unknown keys are rejected. Missing keys keep their defaults.
  static NetworkConfig from_json(const nlohmann::json& j, const std::string& path = "network");
};

struct NetworkOutput {
  Var probs;  // [N, n_classes, spatial...], softmax over axis 1
  /// aux[i] is the probability map at the resolution of stage i + 1; empty
  /// without deep supervision.
  std::vector<Var> aux;
};

/// Loss weights per resolution level (level 0 = full resolution):
/// 2^-s normalized to sum to 1, or {1} without deep supervision.
std::vector<double> deep_supervision_weights(std::size_t levels, bool enabled);

/// Nearest-neighbour downsampling of an integer label map [N, spatial...]
/// by integer factors per spatial axis (keeps the top-left sample).
std::vector<std::uint8_t> downsample_labels(const std::vector<std::uint8_t>& labels,
                                            const std::vector<std::size_t>& shape,
                                            const std::vector<std::size_t>& factors);

/// U-shaped encoder/decoder: stem, per stage U-Mamba blocks with strided
/// downsampling in between, transposed-conv upsampling with concatenated
/// skips and a residual block per decoder stage, 1x1 softmax head.
class SegNetwork {
 public:
  /// Deterministic in (cfg, seed).
  static SegNetwork build(const NetworkConfig& cfg, std::uint64_t seed);

  /// image: [N, in_channels, input_shape...].
  NetworkOutput forward(Graph& graph, Var image);

  const NetworkConfig& config() const noexcept { return cfg_; }
  ParameterStore& params() noexcept { return store_; }
  const ParameterStore& params() const noexcept { return store_; }
  std::size_t parameter_count() const noexcept { return store_.scalar_count(); }

  /// Spatial extents of stage s.
  std::vector<std::size_t> stage_shape(std::size_t s) const;
  /// Cumulative downsampling factor of stage s.
  std::size_t stage_factor(std::size_t s) const;
  std::size_t head_weight_index() const noexcept { return head_w_; }
  std::size_t head_bias_index() const noexcept { return head_b_; }

 private:
  struct ConvNorm {
    std::size_t weight = 0, gamma = 0, beta = 0, stride = 1;
  };
  struct Head {
    std::size_t weight = 0, bias = 0;
  };

  Var conv_norm_act(ParamBinder& bind, const ConvNorm& c, Var x) const;
  Var head(ParamBinder& bind, const Head& h, Var x) const;

  NetworkConfig cfg_;
  ParameterStore store_;
  ConvNorm stem_;
  std::vector<ConvNorm> down_;                   // entering stage s (index s - 1)
  std::vector<std::vector<UMambaBlock>> encoder_;  // per stage
  std::vector<std::size_t> up_;                  // transposed conv, stage s -> s - 1 (index s - 1)
  std::vector<ResidualBlock> decoder_;           // after concat at stage s - 1 (index s - 1)
  std::size_t head_w_ = 0, head_b_ = 0;
  std::vector<Head> aux_heads_;                  // for stages 1..n-1
};

}  // namespace sharpseg
