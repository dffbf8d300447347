#include "sharpseg/run_config.hpp"

#include <cstdio>

#include "sharpseg/error.hpp"
#include "sharpseg/strict_json.hpp"

namespace sharpseg {

using nlohmann::json;

const char* loss_mode_name(LossMode m) noexcept {
  switch (m) {
    case LossMode::CrossEntropy: return "ce";
    case LossMode::Uncertainty: return "uncertainty";
    case LossMode::UncertaintySam: return "uncertainty+sam";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& name) {
  if (name == "ce") return LossMode::CrossEntropy;
  if (name == "uncertainty") return LossMode::Uncertainty;
  if (name == "uncertainty+sam") return LossMode::UncertaintySam;
  fail(ErrorCode::InvalidConfig, "loss.mode must be ce, uncertainty or uncertainty+sam, got '" + name + "'");
}

void RunConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::InvalidConfig, m); };
  network.validate();
  data.synth.validate();
  if (network.n_classes != data.synth.K + 1) bad("network.n_classes must equal data.synth.K + 1");
  if (network.input_shape != data.synth.shape) bad("network.input_shape must equal data.synth.shape");
  if (network.in_channels != 1) bad("network.in_channels must be 1 for single-channel images");
  if (!(optimizer.lr > 0.0)) bad("optimizer.lr must be positive");
  if (!(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0)) bad("optimizer.momentum must be in [0, 1)");
  if (optimizer.sam.enabled && !(optimizer.sam.rho > 0.0)) bad("optimizer.sam.rho must be positive");
  if (loss.mode == LossMode::UncertaintySam && !optimizer.sam.enabled) {
    bad("loss.mode uncertainty+sam requires optimizer.sam.enabled");
  }
  if (!(loss.gamma >= 0.0)) bad("loss.gamma must be >= 0");
  if (loss.components.empty()) bad("loss.components must not be empty");
  if (epochs == 0) bad("epochs must be positive");
  if (steps_per_epoch == 0) bad("steps_per_epoch must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (data.path.empty() && (data.n_train == 0 || data.n_val == 0)) bad("data.n_train and data.n_val must be positive");
}

json RunConfig::to_json() const {
  json comps = json::array();
  for (auto c : loss.components) comps.push_back(component_name(c));
  return {{"network", network.to_json()},
          {"optimizer",
           {{"lr", optimizer.lr},
            {"momentum", optimizer.momentum},
            {"nesterov", optimizer.nesterov},
            {"sam", {{"enabled", optimizer.sam.enabled}, {"rho", optimizer.sam.rho}}}}},
          {"loss", {{"mode", loss_mode_name(loss.mode)}, {"gamma", loss.gamma}, {"M", loss.components.size()},
                    {"components", comps}}},
          {"data", {{"path", data.path}, {"synth", data.synth.to_json()}, {"n_train", data.n_train},
                    {"n_val", data.n_val}, {"seed", data.seed}}},
          {"epochs", epochs},
          {"steps_per_epoch", steps_per_epoch},
          {"batch_size", batch_size},
          {"seed", seed},
          {"output_dir", output_dir}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  StrictObject root(j, "");
  if (const json* n = root.child("network")) c.network = NetworkConfig::from_json(*n, "network");
  if (const json* o = root.child("optimizer")) {
    StrictObject opt(*o, "optimizer");
    c.optimizer.lr = opt.get("lr", c.optimizer.lr);
    c.optimizer.momentum = opt.get("momentum", c.optimizer.momentum);
    c.optimizer.nesterov = opt.get("nesterov", c.optimizer.nesterov);
    if (const json* s = opt.child("sam")) {
      StrictObject sam(*s, "optimizer.sam");
      c.optimizer.sam.enabled = sam.get("enabled", c.optimizer.sam.enabled);
      c.optimizer.sam.rho = sam.get("rho", c.optimizer.sam.rho);
      sam.finish();
    }
    opt.finish();
  }
  if (const json* l = root.child("loss")) {
    StrictObject loss(*l, "loss");
    c.loss.mode = parse_loss_mode(loss.get<std::string>("mode", loss_mode_name(c.loss.mode)));
    c.loss.gamma = loss.get("gamma", c.loss.gamma);
    if (loss.has("components")) {
      const auto names = loss.get<std::vector<std::string>>("components", {});
      c.loss.components.clear();
      for (const auto& n : names) c.loss.components.push_back(parse_component(n));
    }
    const std::size_t M = loss.get<std::size_t>("M", c.loss.components.size());
    if (M != c.loss.components.size()) {
      fail(ErrorCode::InvalidConfig, "loss.M is " + std::to_string(M) + " but loss.components has " +
                                         std::to_string(c.loss.components.size()) + " entries");
    }
    loss.finish();
  }
  if (const json* d = root.child("data")) {
    StrictObject data(*d, "data");
    c.data.path = data.get("path", c.data.path);
    if (const json* s = data.child("synth")) c.data.synth = SynthConfig::from_json(*s, "data.synth");
    c.data.n_train = data.get("n_train", c.data.n_train);
    c.data.n_val = data.get("n_val", c.data.n_val);
    c.data.seed = data.get("seed", c.data.seed);
    data.finish();
  }
  c.epochs = root.get("epochs", c.epochs);
  c.steps_per_epoch = root.get("steps_per_epoch", c.steps_per_epoch);
  c.batch_size = root.get("batch_size", c.batch_size);
  c.seed = root.get("seed", c.seed);
  c.output_dir = root.get("output_dir", c.output_dir);
  root.finish();
  c.validate();
  return c;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

}  // namespace sharpseg
