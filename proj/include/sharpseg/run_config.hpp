#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpseg/losses.hpp"
#include "sharpseg/optim.hpp"
#include "sharpseg/segnet.hpp"
#include "sharpseg/synth.hpp"

namespace sharpseg {

enum class LossMode { CrossEntropy, Uncertainty, UncertaintySam };

const char* loss_mode_name(LossMode m) noexcept;
LossMode parse_loss_mode(const std::string& name);

struct LossConfig {
  LossMode mode = LossMode::Uncertainty;
  double gamma = 2.0;
  std::vector<LossComponent> components{LossComponent::Dice, LossComponent::CrossEntropy, LossComponent::Focal};
};

struct OptimizerConfig {
  double lr = 5e-3;
  double momentum = 0.99;
  bool nesterov = false;
  SAMConfig sam;
};

struct DataConfig {
  /// Dataset directory written by `synth`; empty means generate in memory.
  std::string path;
  SynthConfig synth;
  std::size_t n_train = 200;
  std::size_t n_val = 40;
  std::uint64_t seed = 0;
};

struct RunConfig {
  NetworkConfig network;
  OptimizerConfig optimizer;
  LossConfig loss;
  DataConfig data;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 30;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;
  std::string output_dir = "run";

  void validate() const;
  nlohmann::json to_json() const;
  /// Strict parse; InvalidConfig names the offending field.
  static RunConfig from_json(const nlohmann::json& j);
  /// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

std::string fnv1a_hex(const std::string& text);

}  // namespace sharpseg
