#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpseg/checkpoint.hpp"
#include "sharpseg/landscape.hpp"
#include "sharpseg/losses.hpp"
#include "sharpseg/metrics.hpp"
#include "sharpseg/run_config.hpp"
#include "sharpseg/segnet.hpp"
#include "sharpseg/synth.hpp"

namespace sharpseg {

/// Network input and per-level one-hot targets for a list of samples.
struct Batch {
  Tensor image;                  // [N, 1, spatial...]
  std::vector<Tensor> targets;   // level s: [N, K, stage_shape(s)...]
  std::size_t size = 0;
};

/// Network plus the loss it is trained with (and its sigma parameters).
class SegModel {
 public:
  static SegModel create(const RunConfig& cfg);
  /// Rebuilds from a checkpoint written by train(); metadata carries the
  /// run config.
  static SegModel from_checkpoint(const Checkpoint& ckpt);

  const RunConfig& config() const noexcept { return cfg_; }
  SegNetwork& network() noexcept { return net_; }
  const SegNetwork& network() const noexcept { return net_; }
  bool uncertainty() const noexcept { return cfg_.loss.mode != LossMode::CrossEntropy; }
  /// Raw sigma values [M]; empty tensor for the cross-entropy mode.
  Tensor& sigma_raw() noexcept { return sigma_raw_; }
  std::vector<double> sigmas() const;

  /// Network parameters followed by the sigma parameters when present.
  ParamList trainable();
  std::vector<NamedTensor> named_tensors() const;

  Batch make_batch(std::span<const LabeledVolume* const> samples) const;
  /// Training objective: deep-supervised cross entropy, or the
  /// uncertainty-aware combination of deep-supervised components.
  Var objective(Graph& graph, const Batch& batch);
  /// Forward pass only; [N, K, spatial...] probabilities.
  Tensor predict(const Tensor& image);

 private:
  RunConfig cfg_;
  SegNetwork net_;
  Tensor sigma_raw_;
};

/// Mean of the objective over consecutive batches of cfg.batch_size in
/// dataset order (the last batch may be smaller). Forward only.
double dataset_loss(SegModel& model, const Dataset& data);

/// Full metrics on `data` from argmax predictions. `taus` as in
/// evaluate_segmentation.
MetricsReport evaluate_model(SegModel& model, const Dataset& data, std::vector<double> taus = {1.0});
/// Mean foreground DSC only (cheaper, used per epoch).
double mean_dsc(SegModel& model, const Dataset& data);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_mean_dsc = 0.0;
  std::vector<double> sigmas;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  MetricsReport final_report;  // validation set, last weights
  double best_val_mean_dsc = 0.0;
  std::size_t best_epoch = 0;
  std::size_t zero_gradient_steps = 0;
  std::string config_hash;
};

struct TrainOptions {
  /// Write checkpoints, epochs.csv and metrics.json under cfg.output_dir.
  bool write_artifacts = true;
  std::function<void(const std::string&)> log;
};

/// The train / val datasets described by cfg.data: read from
/// data.path/{train,val} or synthesized from data.seed.
struct DataSplit {
  Dataset train, val;
};
DataSplit load_data(const RunConfig& cfg);

/// Deterministic in (cfg, data). The model is trained in place.
TrainResult train(SegModel& model, const DataSplit& data, const TrainOptions& options = {});

/// dataset_loss of a model copy on a fixed dataset, with the sigma values
/// frozen: only network parameters are exposed for perturbation.
class DatasetLossModel : public LossModel {
 public:
  DatasetLossModel(SegModel model, const Dataset& data) : model_(std::move(model)), data_(&data) {}

  ParamList parameters() override { return model_.network().params().refs(); }
  double loss() override { return dataset_loss(model_, *data_); }
  std::unique_ptr<LossModel> clone() const override { return std::make_unique<DatasetLossModel>(*this); }
  SegModel& model() noexcept { return model_; }

 private:
  SegModel model_;
  const Dataset* data_;
};

/// Report JSON with the config hash attached.
nlohmann::json report_json(const MetricsReport& report, const std::string& config_hash);

}  // namespace sharpseg
