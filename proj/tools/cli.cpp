#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sharpseg/audit.hpp"
#include "sharpseg/binary_io.hpp"
#include "sharpseg/error.hpp"
#include "sharpseg/landscape.hpp"
#include "sharpseg/training.hpp"

namespace sharpseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

void log(const std::string& msg) { std::cerr << msg << "\n"; }

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return kExitConfig;
    case ErrorCode::Io:
    case ErrorCode::CorruptHeader:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::VersionMismatch: return kExitIo;
    default: return kExitFailure;
  }
}

RunConfig read_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

int cmd_train(const std::string& config_path, const std::string& output_dir) {
  RunConfig cfg = read_config(config_path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  log("config " + cfg.hash() + " mode " + loss_mode_name(cfg.loss.mode) + " -> " + cfg.output_dir);
  const DataSplit data = load_data(cfg);
  SegModel model = SegModel::create(cfg);
  TrainOptions options;
  options.log = log;
  const TrainResult r = train(model, data, options);
  std::ostringstream msg;
  msg << "final val mean_dsc " << r.final_report.mean_dsc << " (best " << r.best_val_mean_dsc << " at epoch "
      << r.best_epoch << ")";
  log(msg.str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  SegModel model = SegModel::from_checkpoint(ckpt);
  const Dataset data = read_dataset(data_dir);
  const MetricsReport report = evaluate_model(model, data);
  const std::string hash = ckpt.metadata.value("config_hash", model.config().hash());
  io::write_text(out, report_json(report, hash).dump(2) + "\n");
  std::cout << "mean_dsc " << report.mean_dsc << "\n";
  for (const auto& [c, v] : report.per_class_dsc) std::cout << "dsc[" << c << "] " << v << "\n";
  std::cout << "mse " << report.mse << "\n";
  log("wrote " + out);
  return 0;
}

int cmd_landscape(const std::string& checkpoint, const std::string& data_dir, std::size_t steps, double extent,
                  std::uint64_t seed, std::size_t workers, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  SegModel model = SegModel::from_checkpoint(ckpt);
  const Dataset data = read_dataset(data_dir);
  DatasetLossModel lm(std::move(model), data);
  const DirectionPair dirs = sample_directions(lm.parameters(), seed);
  if (dirs.zero_weight_filters > 0) {
    log(std::to_string(dirs.zero_weight_filters) + " zero-norm filters left unperturbed");
  }
  LandscapeGrid grid = evaluate_grid(lm, dirs, extent, steps, workers);
  grid.config_hash = ckpt.metadata.value("config_hash", lm.model().config().hash());
  write_landscape(grid, out);
  std::ostringstream msg;
  msg << "center loss " << grid.center_loss << ", range within 0.25: " << flatness_range(grid, 0.25);
  log(msg.str());
  return 0;
}

int cmd_gradcheck(const std::string& module) {
  bool ok = true;
  run_audit(module, [&](const AuditResult& r) {
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %-8s %-28s %.3e", r.passed ? "ok" : "FAIL", r.module.c_str(),
                  r.name.c_str(), r.error);
    std::cout << line << (r.message.empty() ? "" : "  " + r.message) << "\n";
    ok = ok && r.passed;
  });
  return ok ? 0 : kExitFailure;
}

int cmd_synth(const std::string& out, std::size_t n, std::size_t n_val, std::uint64_t seed,
              const std::string& config_path) {
  SynthConfig cfg;
  if (!config_path.empty()) {
    json j;
    try {
      j = json::parse(io::read_text(config_path));
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidConfig, config_path + ": " + e.what());
    }
    cfg = SynthConfig::from_json(j, "synth");
  }
  cfg.validate();
  if (n == 0) fail(ErrorCode::InvalidConfig, "--n must be positive");
  const SeedSplit seeds = split_seeds(seed, n, n_val);
  const fs::path root = out;
  Dataset train = synthesize(cfg, seeds.train);
  train.provenance["base_seed"] = seed;
  train.provenance["split"] = "train";
  write_dataset(train, root / "train");
  if (n_val > 0) {
    Dataset val = synthesize(cfg, seeds.val);
    val.provenance["base_seed"] = seed;
    val.provenance["split"] = "val";
    write_dataset(val, root / "val");
  }
  log("wrote " + std::to_string(n) + " train and " + std::to_string(n_val) + " val samples to " + out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Segmentation training, evaluation and loss-landscape tools"};
  app.require_subcommand(1);

  std::string config, output_dir;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON run config");
  train_cmd->add_option("--config", config, "Run config (JSON)")->required();
  train_cmd->add_option("--output-dir", output_dir, "Override output_dir from the config");

  std::string checkpoint, data_dir, out = "eval_metrics.json";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--out", out, "Report path");

  std::size_t steps = 21, workers = 1;
  double extent = 1.0;
  std::uint64_t dir_seed = 0;
  std::string land_out = "landscape";
  auto* land_cmd = app.add_subcommand("landscape", "Sample a 2D loss surface around a checkpoint");
  land_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  land_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  land_cmd->add_option("--steps", steps, "Grid points per axis (odd)");
  land_cmd->add_option("--extent", extent, "Half-width of the grid");
  land_cmd->add_option("--seed", dir_seed, "Direction seed");
  land_cmd->add_option("--workers", workers, "Threads evaluating grid cells");
  land_cmd->add_option("--out", land_out, "Output directory");

  std::string module;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference audit of every differentiable operation");
  grad_cmd->add_option("--module", module, "Restrict to one module")
      ->check(CLI::IsMember(audit_modules()));

  std::string synth_out, synth_config;
  std::size_t n = 200, n_val = 40;
  std::uint64_t seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic train/val dataset");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--n", n, "Training samples");
  synth_cmd->add_option("--n-val", n_val, "Validation samples");
  synth_cmd->add_option("--seed", seed, "Base seed");
  synth_cmd->add_option("--config", synth_config, "Synth settings (JSON)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(config, output_dir);
    if (*eval_cmd) return cmd_eval(checkpoint, data_dir, out);
    if (*land_cmd) return cmd_landscape(checkpoint, data_dir, steps, extent, dir_seed, workers, land_out);
    if (*grad_cmd) return cmd_gradcheck(module);
    if (*synth_cmd) return cmd_synth(synth_out, n, n_val, seed, synth_config);
  } catch (const Error& e) {
    log(std::string("error: ") + e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace sharpseg
