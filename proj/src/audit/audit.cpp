#include "sharpseg/audit.hpp"

#include <algorithm>
#include <random>

#include "sharpseg/blocks.hpp"
#include "sharpseg/error.hpp"
#include "sharpseg/gradcheck.hpp"
#include "sharpseg/losses.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/ssm.hpp"
#include "sharpseg/training.hpp"

namespace sharpseg {

namespace {

Tensor uniform(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

std::vector<Tensor*> all_of(ParameterStore& store) {
  std::vector<Tensor*> out;
  for (auto& e : store.entries()) out.push_back(&e.tensor);
  return out;
}

double audit_ssm_scan(bool diagonal) {
  std::mt19937_64 rng(diagonal ? 31 : 30);
  const std::size_t S = 3, I = 2, O = 2, T = 6;
  Tensor A = diagonal ? uniform({S}, rng, -0.9, 0.9) : uniform({S, S}, rng, -0.4, 0.4);
  Tensor B = uniform({S, I}, rng), C = uniform({O, S}, rng), D = uniform({O, I}, rng);
  Tensor x0 = uniform({S}, rng), u = uniform({T, I}, rng);
  const Tensor ws = uniform({T, S}, rng), wo = uniform({T, O}, rng);
  std::vector<Tensor*> params{&A, &B, &C, &D, &x0, &u};
  return grad_check(
      [&](Graph& g) {
        const ScanResult r = ssm_scan(
            {g.parameter(A), g.parameter(B), g.parameter(C), g.parameter(D), g.parameter(x0)}, g.parameter(u));
        return add(sum(mul(r.states, g.constant(ws))), sum(mul(r.outputs, g.constant(wo))));
      },
      params);
}

double audit_channel_scan(bool selective) {
  std::mt19937_64 rng(selective ? 41 : 40);
  const std::size_t N = 2, T = 5, E = 3, S = 2;
  Tensor u = uniform({N, T, E}, rng), a = uniform({E, S}, rng, 0.1, 0.95);
  const Shape bc = selective ? Shape{N, T, S} : Shape{E, S};
  Tensor b = uniform(bc, rng), c = uniform(bc, rng), d = uniform({E}, rng);
  const Tensor w = uniform({N, T, E}, rng);
  std::vector<Tensor*> params{&u, &a, &b, &c, &d};
  return grad_check(
      [&](Graph& g) {
        return sum(mul(channel_scan(g.parameter(u), g.parameter(a), g.parameter(b), g.parameter(c), g.parameter(d)),
                       g.constant(w)));
      },
      params);
}

double audit_attention() {
  std::mt19937_64 rng(50);
  Tensor q = uniform({4, 3}, rng), k = uniform({4, 3}, rng), v = uniform({4, 2}, rng);
  const Tensor w = uniform({4, 2}, rng);
  std::vector<Tensor*> params{&q, &k, &v};
  return grad_check(
      [&](Graph& g) {
        return sum(mul(selective_attention(g.parameter(q), g.parameter(k), g.parameter(v)), g.constant(w)));
      },
      params);
}

// Perturbs freshly initialized parameters so zero-initialized entries
// (biases, projections) do not hide gradient paths.
void jitter(ParameterStore& store, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& e : store.entries())
    for (auto& v : e.tensor.data()) v += u(rng);
}

template <class Block>
double audit_block(const Block& block, ParameterStore& store, std::size_t in_c, std::size_t out_c,
                   std::mt19937_64& rng) {
  jitter(store, rng);
  Tensor x = uniform({2, in_c, 4, 4}, rng);
  const Tensor w = uniform({2, out_c, 4, 4}, rng);
  auto params = all_of(store);
  params.push_back(&x);
  return grad_check(
      [&](Graph& g) {
        ParamBinder bind(g, store);
        return sum(mul(block.forward(bind, g.parameter(x)), g.constant(w)));
      },
      params);
}

double audit_mamba(bool selective) {
  std::mt19937_64 rng(selective ? 61 : 60);
  ParameterStore store;
  const MambaBlock m = MambaBlock::create(store, "mamba", MambaConfig{3, 2, 3, selective}, rng);
  return audit_block(m, store, 3, 3, rng);
}

double audit_residual() {
  std::mt19937_64 rng(62);
  ParameterStore store;
  const ResidualBlock r = ResidualBlock::create(store, "res", 2, 3, 2, rng);
  return audit_block(r, store, 2, 3, rng);
}

double audit_umamba() {
  std::mt19937_64 rng(63);
  ParameterStore store;
  const UMambaBlock b = UMambaBlock::create(store, "umamba", 1, 2, 2, MambaConfig{2, 2, 2, true}, rng);
  return audit_block(b, store, 1, 2, rng);
}

// Probabilities from free logits and a random one-hot target.
struct LossInputs {
  Tensor logits, target;
};

LossInputs loss_inputs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LossInputs in{uniform({2, 3, 3, 3}, rng, -2.0, 2.0), Tensor()};
  std::vector<std::uint8_t> labels(18);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 3);
  in.target = one_hot(labels, {2, 3, 3}, 3);
  return in;
}

double audit_component(LossComponent c, double gamma, std::uint64_t seed) {
  LossInputs in = loss_inputs(seed);
  std::vector<Tensor*> params{&in.logits};
  return grad_check(
      [&](Graph& g) {
        return component_loss(c, softmax(g.parameter(in.logits), 1), g.constant(in.target), FocalConfig{gamma});
      },
      params);
}

double audit_uncertainty() {
  LossInputs in = loss_inputs(70);
  std::mt19937_64 rng(71);
  Tensor raw = uniform({3}, rng, -0.5, 1.5);
  std::vector<Tensor*> params{&in.logits, &raw};
  return grad_check(
      [&](Graph& g) {
        const Var p = softmax(g.parameter(in.logits), 1);
        const Var t = g.constant(in.target);
        const Var parts[] = {dice_loss(p, t), ce_loss(p, t), focal_loss(p, t)};
        return uncertainty_aware_loss(parts, g.parameter(raw));
      },
      params);
}

// Toy network (default channel widths) at 16x16 with deep supervision and a
// batch of two random label maps, through the full training objective.
double audit_network(LossMode mode) {
  RunConfig cfg;
  cfg.network.input_shape = {16, 16};
  cfg.data.synth.shape = {16, 16};
  cfg.loss.mode = mode;
  cfg.optimizer.sam.enabled = mode == LossMode::UncertaintySam;
  cfg.seed = 80 + static_cast<std::uint64_t>(mode);
  SegModel model = SegModel::create(cfg);
  std::mt19937_64 rng(cfg.seed);
  jitter(model.network().params(), rng);
  std::vector<LabeledVolume> samples(2);
  for (auto& s : samples) {
    s.shape = {16, 16};
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (std::size_t i = 0; i < 256; ++i) {
      s.image.push_back(u(rng));
      s.labels.push_back(static_cast<std::uint8_t>(rng() % 4));
    }
  }
  const LabeledVolume* ptrs[] = {&samples[0], &samples[1]};
  const Batch batch = model.make_batch(ptrs);
  std::vector<Tensor*> params;
  for (auto& p : model.trainable()) params.push_back(p.tensor);
  GradCheckOptions opt;
  opt.max_entries_per_tensor = 4;
  opt.seed = cfg.seed;
  return grad_check([&](Graph& g) { return model.objective(g, batch); }, params, opt);
}

}  // namespace

std::vector<std::string> audit_modules() { return {"tensor", "ssm", "blocks", "losses", "network"}; }

std::vector<AuditCase> audit_cases(const std::string& module) {
  const auto mods = audit_modules();
  if (!module.empty() && std::find(mods.begin(), mods.end(), module) == mods.end()) {
    fail(ErrorCode::InvalidConfig, "unknown audit module '" + module + "'");
  }
  std::vector<AuditCase> all;
  for (OpKind k : differentiable_primitives()) {
    for (std::uint64_t seed : {1, 2}) {
      all.push_back({"tensor", std::string(op_name(k)) + "#" + std::to_string(seed),
                     [k, seed] { return audit_primitive(k, seed); }});
    }
  }
  all.push_back({"ssm", "ssm_scan.full", [] { return audit_ssm_scan(false); }});
  all.push_back({"ssm", "ssm_scan.diagonal", [] { return audit_ssm_scan(true); }});
  all.push_back({"ssm", "channel_scan.static", [] { return audit_channel_scan(false); }});
  all.push_back({"ssm", "channel_scan.selective", [] { return audit_channel_scan(true); }});
  all.push_back({"ssm", "selective_attention", audit_attention});
  all.push_back({"blocks", "mamba.selective", [] { return audit_mamba(true); }});
  all.push_back({"blocks", "mamba.static", [] { return audit_mamba(false); }});
  all.push_back({"blocks", "residual", audit_residual});
  all.push_back({"blocks", "umamba", audit_umamba});
  all.push_back({"losses", "dice", [] { return audit_component(LossComponent::Dice, 2.0, 90); }});
  all.push_back({"losses", "ce", [] { return audit_component(LossComponent::CrossEntropy, 2.0, 91); }});
  all.push_back({"losses", "focal.gamma2", [] { return audit_component(LossComponent::Focal, 2.0, 92); }});
  all.push_back({"losses", "focal.gamma0.5", [] { return audit_component(LossComponent::Focal, 0.5, 93); }});
  all.push_back({"losses", "uncertainty", audit_uncertainty});
  for (LossMode m : {LossMode::CrossEntropy, LossMode::Uncertainty, LossMode::UncertaintySam}) {
    all.push_back({"network", std::string("toy.") + loss_mode_name(m), [m] { return audit_network(m); }});
  }
  if (module.empty()) return all;
  std::vector<AuditCase> out;
  for (auto& c : all) {
    if (c.module == module) out.push_back(std::move(c));
  }
  return out;
}

std::vector<AuditResult> run_audit(const std::string& module,
                                   const std::function<void(const AuditResult&)>& on_result) {
  std::vector<AuditResult> out;
  for (const auto& c : audit_cases(module)) {
    AuditResult r{c.module, c.name, 0.0, false, ""};
    try {
      r.error = c.run();
      r.passed = r.error < kGradTolerance;
    } catch (const std::exception& e) {
      r.message = e.what();
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sharpseg
