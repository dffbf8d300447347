#include "sharpseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sharpseg/binary_io.hpp"
#include "sharpseg/error.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/optim.hpp"

namespace sharpseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSigmaName = "loss.sigma_raw";

void log_line(const TrainOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

std::size_t spatial_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<const LabeledVolume*> pointers(const Dataset& data, std::size_t begin, std::size_t end) {
  std::vector<const LabeledVolume*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&data.samples[i]);
  return out;
}

}  // namespace

SegModel SegModel::create(const RunConfig& cfg) {
  cfg.validate();
  SegModel m;
  m.cfg_ = cfg;
  m.net_ = SegNetwork::build(cfg.network, cfg.seed);
  if (m.uncertainty()) m.sigma_raw_ = UncertaintyLossState::create(cfg.loss.components).raw;
  return m;
}

SegModel SegModel::from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("config")) fail(ErrorCode::InvalidConfig, "checkpoint metadata lacks config");
  SegModel m = create(RunConfig::from_json(ckpt.metadata.at("config")));
  std::vector<NamedTensor> net;
  bool have_sigma = false;
  for (const auto& t : ckpt.tensors) {
    if (t.name == kSigmaName) {
      if (!m.uncertainty() || t.tensor.shape() != m.sigma_raw_.shape()) {
        fail(ErrorCode::ShapeMismatch, "checkpoint sigma does not match the loss configuration");
      }
      m.sigma_raw_ = t.tensor;
      have_sigma = true;
    } else {
      net.push_back(t);
    }
  }
  if (net.size() != m.net_.params().size()) {
    fail(ErrorCode::ShapeMismatch, "checkpoint holds " + std::to_string(net.size()) + " network tensors, expected " +
                                       std::to_string(m.net_.params().size()));
  }
  if (m.uncertainty() && !have_sigma) fail(ErrorCode::ShapeMismatch, "checkpoint lacks " + std::string(kSigmaName));
  m.net_.params().assign(net);
  return m;
}

std::vector<double> SegModel::sigmas() const {
  std::vector<double> out;
  for (double r : sigma_raw_.data()) out.push_back(r > 30.0 ? r : std::log1p(std::exp(r)));
  return out;
}

ParamList SegModel::trainable() {
  ParamList out = net_.params().refs();
  if (uncertainty()) out.push_back({kSigmaName, &sigma_raw_});
  return out;
}

std::vector<NamedTensor> SegModel::named_tensors() const {
  std::vector<NamedTensor> out(net_.params().entries().begin(), net_.params().entries().end());
  if (sigma_raw_.size() > 0) out.push_back({kSigmaName, sigma_raw_});
  return out;
}

Batch SegModel::make_batch(std::span<const LabeledVolume* const> samples) const {
  const auto& nc = cfg_.network;
  const std::size_t n = samples.size();
  const std::size_t pixels = spatial_size(nc.input_shape);
  Batch b;
  b.size = n;
  Shape image_shape{n, 1};
  image_shape.insert(image_shape.end(), nc.input_shape.begin(), nc.input_shape.end());
  b.image = Tensor(image_shape);
  std::vector<std::uint8_t> labels;
  labels.reserve(n * pixels);
  for (std::size_t i = 0; i < n; ++i) {
    const LabeledVolume& v = *samples[i];
    if (v.shape != nc.input_shape) {
      fail(ErrorCode::ShapeMismatch, "sample shape " + shape_str(v.shape) + " differs from network input " +
                                         shape_str(nc.input_shape));
    }
    std::copy(v.image.begin(), v.image.end(), b.image.data().begin() + static_cast<std::ptrdiff_t>(i * pixels));
    labels.insert(labels.end(), v.labels.begin(), v.labels.end());
  }
  const std::size_t levels = nc.deep_supervision ? nc.n_stages : 1;
  for (std::size_t s = 0; s < levels; ++s) {
    Shape full{n};
    full.insert(full.end(), nc.input_shape.begin(), nc.input_shape.end());
    if (s == 0) {
      b.targets.push_back(one_hot(labels, full, nc.n_classes));
      continue;
    }
    const std::vector<std::size_t> factors(nc.input_shape.size(), net_.stage_factor(s));
    const auto small = downsample_labels(labels, full, factors);
    Shape small_shape{n};
    for (std::size_t e : net_.stage_shape(s)) small_shape.push_back(e);
    b.targets.push_back(one_hot(small, small_shape, nc.n_classes));
  }
  return b;
}

Var SegModel::objective(Graph& graph, const Batch& batch) {
  const NetworkOutput out = net_.forward(graph, graph.constant(batch.image));
  std::vector<Var> maps{out.probs};
  maps.insert(maps.end(), out.aux.begin(), out.aux.end());
  if (maps.size() != batch.targets.size()) {
    fail(ErrorCode::ShapeMismatch, "batch has " + std::to_string(batch.targets.size()) + " target levels, network " +
                                       std::to_string(maps.size()));
  }
  const auto weights = deep_supervision_weights(maps.size(), cfg_.network.deep_supervision);
  std::vector<Var> targets;
  for (const auto& t : batch.targets) targets.push_back(graph.constant(t));

  auto supervised = [&](LossComponent c) {
    Var total;
    for (std::size_t s = 0; s < maps.size(); ++s) {
      const Var term = mul_scalar(component_loss(c, maps[s], targets[s], FocalConfig{cfg_.loss.gamma}), weights[s]);
      total = total.valid() ? add(total, term) : term;
    }
    return total;
  };
  if (!uncertainty()) return supervised(LossComponent::CrossEntropy);
  std::vector<Var> parts;
  for (auto c : cfg_.loss.components) parts.push_back(supervised(c));
  return uncertainty_aware_loss(parts, graph.parameter(sigma_raw_));
}

Tensor SegModel::predict(const Tensor& image) {
  Graph g;
  return net_.forward(g, g.constant(image)).probs.value();
}

double dataset_loss(SegModel& model, const Dataset& data) {
  if (data.samples.empty()) fail(ErrorCode::EmptyDataset, "dataset_loss on an empty dataset");
  const std::size_t bs = model.config().batch_size;
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t i = 0; i < data.samples.size(); i += bs) {
    const auto ptrs = pointers(data, i, std::min(data.samples.size(), i + bs));
    const Batch b = model.make_batch(ptrs);
    Graph g;
    const double v = model.objective(g, b).item();
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite loss on batch " + std::to_string(batches));
    total += v;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

namespace {

constexpr std::size_t kEvalBatch = 8;

// Per-sample probabilities [1, K, spatial...] in dataset order.
std::vector<Tensor> predict_all(SegModel& model, const Dataset& data) {
  const auto& nc = model.config().network;
  const std::size_t per_sample = nc.n_classes * spatial_size(nc.input_shape);
  Shape one{1, nc.n_classes};
  one.insert(one.end(), nc.input_shape.begin(), nc.input_shape.end());
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < data.samples.size(); i += kEvalBatch) {
    const auto ptrs = pointers(data, i, std::min(data.samples.size(), i + kEvalBatch));
    const Tensor probs = model.predict(model.make_batch(ptrs).image);
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
      const auto first = probs.data().begin() + static_cast<std::ptrdiff_t>(k * per_sample);
      out.emplace_back(one, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(per_sample)));
    }
  }
  return out;
}

LabelMap label_map(const LabeledVolume& v) { return {v.shape, v.labels}; }

}  // namespace

MetricsReport evaluate_model(SegModel& model, const Dataset& data, std::vector<double> taus) {
  if (data.samples.empty()) fail(ErrorCode::EmptyDataset, "evaluation on an empty dataset");
  const std::size_t K = model.config().network.n_classes;
  if (data.n_classes != K) {
    fail(ErrorCode::ShapeMismatch, "dataset has " + std::to_string(data.n_classes) + " classes, model " +
                                       std::to_string(K));
  }
  const auto probs = predict_all(model, data);
  std::vector<LabelMap> preds, gts;
  std::vector<Tensor> targets;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const LabeledVolume& v = data.samples[i];
    preds.push_back(argmax_labels(probs[i]));
    gts.push_back(label_map(v));
    Shape ls{1};
    ls.insert(ls.end(), v.shape.begin(), v.shape.end());
    targets.push_back(one_hot(v.labels, ls, K));
    ids.push_back(std::to_string(v.seed));
  }
  return evaluate_segmentation(preds, gts, probs, targets, K, std::move(taus), std::move(ids));
}

double mean_dsc(SegModel& model, const Dataset& data) {
  if (data.samples.empty()) fail(ErrorCode::EmptyDataset, "evaluation on an empty dataset");
  const std::size_t K = model.config().network.n_classes;
  const auto probs = predict_all(model, data);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const LabelMap pred = argmax_labels(probs[i]);
    const LabelMap gt = label_map(data.samples[i]);
    for (std::size_t c = 1; c < K; ++c) total += dsc(pred, gt, static_cast<int>(c));
  }
  return total / static_cast<double>(probs.size() * (K - 1));
}

DataSplit load_data(const RunConfig& cfg) {
  DataSplit d;
  if (!cfg.data.path.empty()) {
    const fs::path root = cfg.data.path;
    d.train = read_dataset(root / "train");
    d.val = read_dataset(root / "val");
  } else {
    const SeedSplit seeds = split_seeds(cfg.data.seed, cfg.data.n_train, cfg.data.n_val);
    d.train = synthesize(cfg.data.synth, seeds.train);
    d.val = synthesize(cfg.data.synth, seeds.val);
  }
  if (d.train.samples.empty() || d.val.samples.empty()) {
    fail(ErrorCode::EmptyDataset, "training and validation sets must both be non-empty");
  }
  return d;
}

json report_json(const MetricsReport& report, const std::string& config_hash) {
  json j = report.to_json();
  j["config_hash"] = config_hash;
  return j;
}

namespace {

void save_model(const SegModel& model, const fs::path& dir, std::size_t epoch, double val_dsc,
                const std::string& hash) {
  const auto tensors = model.named_tensors();
  save_checkpoint(dir, tensors,
                  {{"kind", "sharpseg-model"},
                   {"config", model.config().to_json()},
                   {"config_hash", hash},
                   {"epoch", epoch},
                   {"val_mean_dsc", val_dsc}});
}

std::string epochs_csv(const std::vector<EpochRecord>& records, std::size_t n_sigma) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,lr,train_loss,val_mean_dsc";
  for (std::size_t m = 0; m < n_sigma; ++m) os << ",sigma_" << m;
  os << "\n";
  for (const auto& r : records) {
    os << r.epoch << "," << r.lr << "," << r.train_loss << "," << r.val_mean_dsc;
    for (double s : r.sigmas) os << "," << s;
    os << "\n";
  }
  return os.str();
}

}  // namespace

TrainResult train(SegModel& model, const DataSplit& data, const TrainOptions& options) {
  const RunConfig& cfg = model.config();
  TrainResult result;
  result.config_hash = cfg.hash();
  const fs::path out = cfg.output_dir;
  if (options.write_artifacts) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + out.string() + ": " + ec.message());
    json c = cfg.to_json();
    c["config_hash"] = result.config_hash;
    io::write_text(out / "config.json", c.dump(2) + "\n");
  }

  OptimizerState opt = OptimizerState::create(model.trainable(), cfg.optimizer.lr, cfg.optimizer.momentum,
                                              cfg.optimizer.nesterov);
  const bool use_sam = cfg.optimizer.sam.enabled;
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<std::size_t> order(data.train.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  auto next_batch = [&] {
    std::vector<const LabeledVolume*> ptrs;
    for (std::size_t k = 0; k < cfg.batch_size; ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      ptrs.push_back(&data.train.samples[order[cursor++]]);
    }
    return model.make_batch(ptrs);
  };

  result.best_val_mean_dsc = -1.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = poly_lr(epoch, cfg.epochs, cfg.optimizer.lr);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
      const Batch batch = next_batch();
      LossClosure closure = [&] {
        Graph g;
        const Var loss = model.objective(g, batch);
        g.backward(loss);
        return loss.item();
      };
      double loss;
      if (use_sam) {
        const SAMResult r = sam_step(opt, closure, cfg.optimizer.sam);
        if (r.zero_gradient) ++result.zero_gradient_steps;
        loss = r.loss_clean;
      } else {
        loss = plain_step(opt, closure);
      }
      if (!std::isfinite(loss)) fail(ErrorCode::NonFinite, "non-finite training loss at epoch " + std::to_string(epoch));
      loss_sum += loss;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.lr;
    rec.train_loss = loss_sum / static_cast<double>(cfg.steps_per_epoch);
    rec.val_mean_dsc = mean_dsc(model, data.val);
    rec.sigmas = model.sigmas();
    result.epochs.push_back(rec);
    {
      std::ostringstream msg;
      msg << "epoch " << epoch << " lr " << rec.lr << " loss " << rec.train_loss << " val_dsc " << rec.val_mean_dsc;
      log_line(options, msg.str());
    }
    if (rec.val_mean_dsc > result.best_val_mean_dsc) {
      result.best_val_mean_dsc = rec.val_mean_dsc;
      result.best_epoch = epoch;
      if (options.write_artifacts) save_model(model, out / "checkpoints" / "best", epoch, rec.val_mean_dsc, result.config_hash);
    }
    if (options.write_artifacts) {
      io::write_text(out / "epochs.csv", epochs_csv(result.epochs, model.sigmas().size()));
    }
  }

  result.final_report = evaluate_model(model, data.val);
  if (options.write_artifacts) {
    save_model(model, out / "checkpoints" / "last", cfg.epochs - 1, result.epochs.back().val_mean_dsc,
               result.config_hash);
    io::write_text(out / "metrics.json", report_json(result.final_report, result.config_hash).dump(2) + "\n");
    io::write_text(out / "samples.csv", result.final_report.samples_csv());
  }
  return result;
}

}  // namespace sharpseg
