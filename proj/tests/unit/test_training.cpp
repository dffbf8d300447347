#include <gtest/gtest.h>

#include <filesystem>
#include <optional>

#include "sharpseg/error.hpp"
#include "sharpseg/training.hpp"

using namespace sharpseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig small(LossMode mode = LossMode::Uncertainty) {
  RunConfig c;
  c.network.input_shape = {16, 16};
  c.data.synth.shape = {16, 16};
  c.data.n_train = 6;
  c.data.n_val = 3;
  c.loss.mode = mode;
  c.optimizer.sam.enabled = mode == LossMode::UncertaintySam;
  c.epochs = 2;
  c.steps_per_epoch = 2;
  c.batch_size = 2;
  return c;
}

std::optional<ErrorCode> parse_error(const json& j) {
  try {
    RunConfig::from_json(j);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST(RunConfig, RoundTripsAndHashesCanonically) {
  const RunConfig c = small(LossMode::UncertaintySam);
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
  RunConfig d = c;
  d.seed = 1;
  EXPECT_NE(d.hash(), c.hash());
}

TEST(RunConfig, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(RunConfig, RejectsInconsistentSettings) {
  EXPECT_EQ(parse_error({{"loss", {{"mode", "uncertainty+sam"}}}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"loss", {{"M", 2}}}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"loss", {{"components", {"dice", "ce"}}, {"M", 2}}}}), std::nullopt);
  EXPECT_EQ(parse_error({{"loss", {{"mode", "mse"}}}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"epochs", 0}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"batch_size", -1}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"optimizer", {{"sam", {{"rho", 0.1}, {"radius", 1}}}}}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"network", {{"n_classes", 3}}}}), ErrorCode::InvalidConfig);
  try {
    RunConfig::from_json({{"data", {{"n_trian", 5}}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("data.n_trian"), std::string::npos);
  }
}

TEST(SegModel, BatchHasOneTargetPerSupervisionLevel) {
  const RunConfig c = small();
  SegModel m = SegModel::create(c);
  const Dataset d = synthesize(c.data.synth, {1, 2, 3});
  const LabeledVolume* ptrs[] = {&d.samples[0], &d.samples[2]};
  const Batch b = m.make_batch(ptrs);
  EXPECT_EQ(b.image.shape(), (Shape{2, 1, 16, 16}));
  ASSERT_EQ(b.targets.size(), 3u);
  EXPECT_EQ(b.targets[0].shape(), (Shape{2, 4, 16, 16}));
  EXPECT_EQ(b.targets[1].shape(), (Shape{2, 4, 8, 8}));
  EXPECT_EQ(b.targets[2].shape(), (Shape{2, 4, 4, 4}));
  // Level 1 keeps the top-left label of each 2x2 block.
  const auto& lbl = d.samples[2].labels;
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      const std::size_t k = lbl[(2 * y) * 16 + 2 * x];
      EXPECT_EQ(b.targets[1][((1 * 4 + k) * 8 + y) * 8 + x], 1.0);
    }
  EXPECT_EQ(b.image[16 * 16 + 5], static_cast<double>(d.samples[2].image[5]));
}

TEST(SegModel, CheckpointRoundTripIsBitExact) {
  const fs::path dir = fs::temp_directory_path() / "sharpseg_model_ckpt";
  fs::remove_all(dir);
  RunConfig c = small(LossMode::Uncertainty);
  c.output_dir = dir.string();
  const DataSplit data = load_data(c);
  SegModel m = SegModel::create(c);
  train(m, data);
  const SegModel back = SegModel::from_checkpoint(load_checkpoint(dir / "checkpoints" / "last"));
  const auto a = m.named_tensors();
  const auto b = back.named_tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].tensor, b[i].tensor);
  }
  SegModel copy = back;
  EXPECT_EQ(dataset_loss(copy, data.val), dataset_loss(m, data.val));
  fs::remove_all(dir);
}

TEST(Training, DeterministicInConfigAndSeed) {
  for (LossMode mode : {LossMode::CrossEntropy, LossMode::UncertaintySam}) {
    const RunConfig c = small(mode);
    const DataSplit data = load_data(c);
    TrainOptions o;
    o.write_artifacts = false;
    SegModel a = SegModel::create(c), b = SegModel::create(c);
    const auto ra = train(a, data, o), rb = train(b, data, o);
    ASSERT_EQ(ra.epochs.size(), 2u);
    for (std::size_t e = 0; e < 2; ++e) {
      EXPECT_EQ(ra.epochs[e].train_loss, rb.epochs[e].train_loss);
      EXPECT_EQ(ra.epochs[e].val_mean_dsc, rb.epochs[e].val_mean_dsc);
    }
    EXPECT_EQ(a.named_tensors()[0].tensor, b.named_tensors()[0].tensor);
  }
}

TEST(Training, UncertaintyModeLearnsSigmas) {
  const RunConfig c = small(LossMode::Uncertainty);
  SegModel m = SegModel::create(c);
  for (double s : m.sigmas()) EXPECT_NEAR(s, 1.0, 1e-15);
  TrainOptions o;
  o.write_artifacts = false;
  train(m, load_data(c), o);
  for (double s : m.sigmas()) EXPECT_NE(s, 1.0);
  EXPECT_EQ(SegModel::create(small(LossMode::CrossEntropy)).sigmas().size(), 0u);
}

TEST(DatasetLossModel, CenterOfGridIsDatasetLoss) {
  const RunConfig c = small(LossMode::Uncertainty);
  const Dataset d = synthesize(c.data.synth, {4, 5, 6});
  SegModel m = SegModel::create(c);
  const double base = dataset_loss(m, d);
  DatasetLossModel lm(m, d);
  const auto grid = evaluate_grid(lm, sample_directions(lm.parameters(), 0), 0.1, 3);
  EXPECT_EQ(grid.center_loss, base);
  // sigma is frozen: only network parameters are exposed.
  EXPECT_EQ(lm.parameters().size(), m.network().params().size());
}
