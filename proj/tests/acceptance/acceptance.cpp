// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [--only N] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "sharpseg/audit.hpp"
#include "sharpseg/binary_io.hpp"
#include "sharpseg/error.hpp"
#include "sharpseg/landscape.hpp"
#include "sharpseg/losses.hpp"
#include "sharpseg/metrics.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/optim.hpp"
#include "sharpseg/training.hpp"

using namespace sharpseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Pinned tolerances and budgets.
constexpr double kAuditBudgetSeconds = 300.0;
constexpr double kLossOracleTol = 1e-10;
constexpr double kFocalReductionTol = 1e-12;
constexpr double kHandSubstitutionTol = 1e-9;
constexpr double kEpsilonNormRelTol = 1e-9;
constexpr double kSgdLimitTol = 1e-9;
constexpr double kSgdLimitRho = 1e-12;
constexpr double kOrderingSlack = 0.005;
constexpr double kFullModeDscFloor = 0.90;
constexpr double kAblationBudgetSeconds = 1800.0;
constexpr std::size_t kSeeds = 5;
constexpr double kSharpnessRho = 0.05;
constexpr std::size_t kSharpnessDirections = 32;
constexpr double kFlatnessRadius = 0.25;
constexpr std::size_t kGridSteps = 5;  // spacing 0.125 over [-0.25, 0.25]
constexpr std::size_t kLandscapeSamples = 32;
constexpr std::size_t kMaskPairs = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
  void note(const char* fmt, ...) __attribute__((format(printf, 2, 3)));
};

void Outcome::note(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  details.emplace_back(buf);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1: gradient audit.
Outcome gradient_audit() {
  Outcome o;
  const auto t0 = Clock::now();
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_name;
  const auto results = run_audit();
  for (const auto& r : results) {
    if (!r.passed) {
      ++failed;
      o.note("failed %s/%s error %.3e %s", r.module.c_str(), r.name.c_str(), r.error, r.message.c_str());
    }
    if (r.error > worst) {
      worst = r.error;
      worst_name = r.module + "/" + r.name;
    }
  }
  const double secs = seconds_since(t0);
  o.note("%zu operations audited, max relative error %.3e (%s), %.1f s", results.size(), worst, worst_name.c_str(),
         secs);
  o.pass = failed == 0 && secs < kAuditBudgetSeconds;
  return o;
}

// 2: loss values against naive loops.
struct LossInstance {
  std::size_t N, K, P;  // batch, classes, pixels
  Tensor p, g;
};

LossInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n(1, 2), k(2, 4), side(2, 4);
  LossInstance in{n(rng), k(rng), 0, {}, {}};
  const std::size_t h = side(rng), w = side(rng);
  in.P = h * w;
  in.p = Tensor({in.N, in.K, h, w});
  in.g = Tensor({in.N, in.K, h, w});
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (std::size_t b = 0; b < in.N; ++b)
    for (std::size_t x = 0; x < in.P; ++x) {
      double total = 0.0;
      for (std::size_t c = 0; c < in.K; ++c) total += in.p[(b * in.K + c) * in.P + x] = u(rng);
      for (std::size_t c = 0; c < in.K; ++c) in.p[(b * in.K + c) * in.P + x] /= total;
      in.g[(b * in.K + rng() % in.K) * in.P + x] = 1.0;
    }
  return in;
}

double naive_dice(const LossInstance& in) {
  double total = 0.0;
  for (std::size_t c = 1; c < in.K; ++c) {
    double inter = 0.0, ps = 0.0, gs = 0.0;
    for (std::size_t b = 0; b < in.N; ++b)
      for (std::size_t x = 0; x < in.P; ++x) {
        const double p = in.p[(b * in.K + c) * in.P + x], g = in.g[(b * in.K + c) * in.P + x];
        inter += p * g;
        ps += p;
        gs += g;
      }
    total += 1.0 - (2.0 * inter + 1e-5) / (ps + gs + 1e-5);
  }
  return total / static_cast<double>(in.K - 1);
}

double naive_focal(const LossInstance& in, double gamma) {
  double total = 0.0;
  for (std::size_t b = 0; b < in.N; ++b)
    for (std::size_t x = 0; x < in.P; ++x)
      for (std::size_t c = 0; c < in.K; ++c) {
        const double p = std::max(in.p[(b * in.K + c) * in.P + x], 1e-12);
        const double g = in.g[(b * in.K + c) * in.P + x];
        total -= g * std::pow(1.0 - p, gamma) * std::log(p);
      }
  return total / static_cast<double>(in.N * in.P);
}

double naive_uncertainty(const std::vector<double>& L, const std::vector<double>& raw) {
  double total = 0.0;
  for (std::size_t m = 0; m < L.size(); ++m) {
    const double s = std::log1p(std::exp(raw[m]));
    total += L[m] / (2.0 * s * s) + std::log(1.0 + s * s);
  }
  return total;
}

double eval_loss(const std::function<Var(Graph&)>& f) {
  Graph g;
  return f(g).item();
}

double eval_uncertainty(const std::vector<double>& L, const std::vector<double>& raw) {
  Graph g;
  std::vector<Var> parts;
  for (double v : L) parts.push_back(g.constant(Tensor::scalar(v)));
  return uncertainty_aware_loss(parts, g.constant(Tensor({raw.size()}, raw))).item();
}

Outcome loss_oracles() {
  Outcome o;
  std::mt19937_64 rng(2024);
  double worst = 0.0, worst_focal0 = 0.0;
  for (int t = 0; t < 100; ++t) {
    const LossInstance in = random_instance(rng);
    auto p = [&](Graph& g) { return g.constant(in.p); };
    auto gt = [&](Graph& g) { return g.constant(in.g); };
    const double dice = eval_loss([&](Graph& g) { return dice_loss(p(g), gt(g)); });
    const double ce = eval_loss([&](Graph& g) { return ce_loss(p(g), gt(g)); });
    const double gamma = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    const double focal = eval_loss([&](Graph& g) { return focal_loss(p(g), gt(g), FocalConfig{gamma}); });
    const double focal0 = eval_loss([&](Graph& g) { return focal_loss(p(g), gt(g), FocalConfig{0.0}); });
    std::vector<double> L{dice, ce, focal}, raw(3);
    for (double& r : raw) r = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    const double ua = eval_uncertainty(L, raw);
    worst = std::max({worst, std::abs(dice - naive_dice(in)), std::abs(ce - naive_focal(in, 0.0)),
                      std::abs(focal - naive_focal(in, gamma)), std::abs(ua - naive_uncertainty(L, raw))});
    worst_focal0 = std::max(worst_focal0, std::abs(focal0 - ce));
  }
  o.note("100 instances: max |loss - naive oracle| %.3e (tol %.0e)", worst, kLossOracleTol);
  o.note("focal gamma=0 vs cross entropy: max difference %.3e (tol %.0e)", worst_focal0, kFocalReductionTol);

  const double unit = sigma_raw_for_unit_sigma();
  struct Hand {
    const char* what;
    double got, want;
  } hand[] = {
      {"M=1 L=1 sigma=1", eval_uncertainty({1.0}, {unit}), 0.5 + std::log(2.0)},
      {"M=3 L=[0.5,0.7,0.2] sigma=1", eval_uncertainty({0.5, 0.7, 0.2}, {unit, unit, unit}),
       0.25 + 0.35 + 0.10 + 3.0 * std::log(2.0)},
      {"all L=0 sigma=1", eval_uncertainty({0.0, 0.0}, {unit, unit}), 2.0 * std::log(2.0)},
  };
  double worst_hand = 0.0;
  for (const auto& h : hand) {
    o.note("%s: %.12f vs %.12f", h.what, h.got, h.want);
    worst_hand = std::max(worst_hand, std::abs(h.got - h.want));
  }
  o.pass = worst < kLossOracleTol && worst_focal0 < kFocalReductionTol && worst_hand < kHandSubstitutionTol;
  return o;
}

// 3: SAM mechanics on quadratics.
struct Quadratic {
  std::size_t n;
  std::vector<double> A, b;  // L = 0.5 x^T A x + b^T x

  static Quadratic random(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> m(n * n);
    for (double& v : m) v = d(rng);
    Quadratic q{n, std::vector<double>(n * n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = i == j ? 0.5 : 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += m[i * n + k] * m[j * n + k];
        q.A[i * n + j] = acc;
      }
    for (double& v : q.b) v = d(rng);
    return q;
  }
  std::vector<double> grad(const std::vector<double>& x) const {
    std::vector<double> g(b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i] += A[i * n + j] * x[j];
    return g;
  }
  // Closure through the autograd engine; records the point of every call.
  LossClosure closure(Tensor& x, std::vector<std::vector<double>>& visited) const {
    return [this, &x, &visited] {
      visited.emplace_back(x.data().begin(), x.data().end());
      Graph g;
      const Var t = g.parameter(x);
      const Var loss = add(mul_scalar(sum(mul(t, matmul(g.constant(Tensor({n, n}, A)), t))), 0.5),
                           sum(mul(g.constant(Tensor({n, 1}, b)), t)));
      g.backward(loss);
      return loss.item();
    };
  }
};

Outcome sam_mechanics() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> d(0.0, 1.0);
  double worst_eps = 0.0, worst_sgd = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Quadratic q = Quadratic::random(6, rng);
    Tensor x({6, 1});
    for (auto& v : x.data()) v = d(rng);
    const double rho = 0.02 * (trial + 1);
    std::vector<std::vector<double>> visited;
    auto st = OptimizerState::create({{"x", &x}}, 0.01, 0.9);
    sam_step(st, q.closure(x, visited), SAMConfig{rho, true});
    double n2 = 0.0;
    for (std::size_t i = 0; i < 6; ++i) n2 += std::pow(visited.at(1)[i] - visited.at(0)[i], 2);
    worst_eps = std::max(worst_eps, std::abs(std::sqrt(n2) - rho) / rho);

    Tensor y({6, 1});
    for (auto& v : y.data()) v = d(rng);
    const std::vector<double> y0(y.data().begin(), y.data().end());
    std::vector<std::vector<double>> unused;
    auto sy = OptimizerState::create({{"y", &y}}, 0.05, 0.0);
    sam_step(sy, q.closure(y, unused), SAMConfig{kSgdLimitRho, true});
    const auto g = q.grad(y0);
    for (std::size_t i = 0; i < 6; ++i) worst_sgd = std::max(worst_sgd, std::abs(y[i] - (y0[i] - 0.05 * g[i])));
  }
  o.note("measured |eps| vs rho: max relative deviation %.3e over 10 quadratics (tol %.0e)", worst_eps,
         kEpsilonNormRelTol);
  o.note("rho=%.0e vs plain SGD oracle: max deviation %.3e (tol %.0e)", kSgdLimitRho, worst_sgd, kSgdLimitTol);

  Tensor theta({1}, 1.0);
  auto st = OptimizerState::create({{"t", &theta}}, 0.1, 0.0);
  sam_step(st,
           [&] {
             Graph g;
             const Var t = g.parameter(theta);
             const Var loss = mul_scalar(sum(mul(t, t)), 0.5);
             g.backward(loss);
             return loss.item();
           },
           SAMConfig{0.1, true});
  const double expected = 1.0 - 0.1 * (1.0 + 0.1);
  o.note("1D trace theta=1 rho=0.1 lr=0.1: %.17g (expected %.17g)", theta[0], expected);
  o.pass = worst_eps < kEpsilonNormRelTol && worst_sgd < kSgdLimitTol && theta[0] == expected &&
           std::abs(theta[0] - 0.89) < 1e-15;
  return o;
}

// 4 and 5: ablation runs through the command-line entry point.
struct RunRecord {
  double mean_dsc = 0.0;
  fs::path dir;
};

struct Ablation {
  std::vector<RunRecord> ce, ua, sam;
  double seconds = 0.0;
  bool ok = true;
};

Ablation run_ablation(const fs::path& work, Outcome& o) {
  Ablation a;
  const auto t0 = Clock::now();
  const char* modes[] = {"ce", "uncertainty", "uncertainty+sam"};
  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    for (const char* mode : modes) {
      RunConfig cfg;
      cfg.loss.mode = parse_loss_mode(mode);
      cfg.optimizer.sam.enabled = cfg.loss.mode == LossMode::UncertaintySam;
      cfg.seed = seed;
      cfg.data.seed = seed;
      const fs::path dir = work / ("seed" + std::to_string(seed)) / mode;
      cfg.output_dir = dir.string();
      const fs::path config_path = dir.string() + ".json";
      fs::create_directories(dir.parent_path());
      io::write_text(config_path, cfg.to_json().dump(2));
      const auto t1 = Clock::now();
      const int rc = run_cli({"sharpseg", "train", "--config", config_path.string()});
      if (rc != 0) {
        o.note("train %s seed %zu exited %d", mode, seed, rc);
        a.ok = false;
        continue;
      }
      const json report = json::parse(io::read_text(dir / "metrics.json"));
      RunRecord r{report.at("mean_dsc").get<double>(), dir};
      o.note("seed %zu %-16s val mean DSC %.4f (%.0f s)", seed, mode, r.mean_dsc, seconds_since(t1));
      auto& bucket = cfg.loss.mode == LossMode::CrossEntropy ? a.ce : cfg.loss.mode == LossMode::Uncertainty ? a.ua : a.sam;
      bucket.push_back(r);
    }
  }
  a.seconds = seconds_since(t0);
  return a;
}

std::vector<double> dscs(const std::vector<RunRecord>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.mean_dsc);
  return out;
}

Outcome ablation_direction(const Ablation& a, Outcome o) {
  if (!a.ok || a.ce.size() != kSeeds || a.ua.size() != kSeeds || a.sam.size() != kSeeds) {
    o.note("incomplete runs");
    o.pass = false;
    return o;
  }
  const double ce = median(dscs(a.ce)), ua = median(dscs(a.ua)), sam = median(dscs(a.sam));
  o.note("median val mean DSC: uncertainty+sam %.4f, uncertainty %.4f, ce %.4f", sam, ua, ce);
  o.note("sam >= uncertainty: %s; uncertainty >= ce - %.3f: %s; sam >= %.2f: %s; runtime %.0f s (budget %.0f)",
         sam >= ua ? "yes" : "no", kOrderingSlack, ua >= ce - kOrderingSlack ? "yes" : "no", kFullModeDscFloor,
         sam >= kFullModeDscFloor ? "yes" : "no", a.seconds, kAblationBudgetSeconds);
  o.pass = sam >= ua && ua >= ce - kOrderingSlack && sam >= kFullModeDscFloor && a.seconds < kAblationBudgetSeconds;
  return o;
}

struct Flatness {
  double sharpness = 0.0, range = 0.0;
  bool center_exact = false;
};

Dataset landscape_subset(const RunConfig& cfg) {
  const SeedSplit seeds = split_seeds(cfg.data.seed, kLandscapeSamples, 0);
  return synthesize(cfg.data.synth, seeds.train);
}

Flatness measure_flatness(const fs::path& run_dir, std::uint64_t seed) {
  SegModel model = SegModel::from_checkpoint(load_checkpoint(run_dir / "checkpoints" / "last"));
  const Dataset data = landscape_subset(model.config());
  SegModel reference = model;
  const double train_loss = dataset_loss(reference, data);
  DatasetLossModel lm(std::move(model), data);
  Flatness f;
  f.sharpness = sharpness_proxy(lm, kSharpnessRho, kSharpnessDirections, seed);
  const LandscapeGrid grid = evaluate_grid(lm, sample_directions(lm.parameters(), seed), kFlatnessRadius, kGridSteps);
  f.range = flatness_range(grid, kFlatnessRadius);
  f.center_exact = grid.center_loss == train_loss;
  return f;
}

Outcome flatness(const Ablation& a, bool& centers_exact) {
  Outcome o;
  centers_exact = true;
  if (a.ua.size() != kSeeds || a.sam.size() != kSeeds) {
    o.note("ablation runs incomplete");
    centers_exact = false;
    return o;
  }
  std::vector<double> s_sgd, s_sam, r_sgd, r_sam;
  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    const Flatness sgd = measure_flatness(a.ua[seed].dir, 100 + seed);
    const Flatness sam = measure_flatness(a.sam[seed].dir, 100 + seed);
    o.note("seed %zu sharpness sgd %.5f sam %.5f | range r<=%.2f sgd %.5f sam %.5f", seed, sgd.sharpness,
           sam.sharpness, kFlatnessRadius, sgd.range, sam.range);
    s_sgd.push_back(sgd.sharpness);
    s_sam.push_back(sam.sharpness);
    r_sgd.push_back(sgd.range);
    r_sam.push_back(sam.range);
    centers_exact = centers_exact && sgd.center_exact && sam.center_exact;
  }
  const double ms_sgd = median(s_sgd), ms_sam = median(s_sam), mr_sgd = median(r_sgd), mr_sam = median(r_sam);
  o.note("median sharpness: sam %.5f vs sgd %.5f; median range: sam %.5f vs sgd %.5f", ms_sam, ms_sgd, mr_sam,
         mr_sgd);
  o.pass = ms_sam < ms_sgd && mr_sam < mr_sgd;
  return o;
}

// 6: metrics against brute force on 3x3 masks.
bool inside(const std::vector<int>& m, int y, int x) { return y >= 0 && y < 3 && x >= 0 && x < 3 && m[y * 3 + x]; }

std::vector<std::pair<int, int>> naive_surface(const std::vector<int>& m) {
  std::vector<std::pair<int, int>> s;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      if (!m[y * 3 + x]) continue;
      if (!inside(m, y - 1, x) || !inside(m, y + 1, x) || !inside(m, y, x - 1) || !inside(m, y, x + 1))
        s.emplace_back(y, x);
    }
  return s;
}

double nearest(std::pair<int, int> a, const std::vector<std::pair<int, int>>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (auto b : set) {
    const double dy = a.first - b.first, dx = a.second - b.second;
    best = std::min(best, std::sqrt(dy * dy + dx * dx));
  }
  return best;
}

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::size_t mismatches = 0, checked_sd = 0;
  for (std::size_t t = 0; t < kMaskPairs; ++t) {
    unsigned pm = rng() % 512, gm = rng() % 512;
    if (t % 100 == 0) gm = 0;  // empty ground truth
    if (t % 100 == 50) pm = 0;  // empty prediction
    std::vector<int> P(9), G(9);
    LabelMap pred{{3, 3}, std::vector<std::uint8_t>(9)}, gt{{3, 3}, std::vector<std::uint8_t>(9)};
    for (int i = 0; i < 9; ++i) {
      pred.labels[i] = P[i] = (pm >> i) & 1;
      gt.labels[i] = G[i] = (gm >> i) & 1;
    }
    int inter = 0, np = 0, ng = 0;
    for (int i = 0; i < 9; ++i) {
      inter += P[i] && G[i];
      np += P[i];
      ng += G[i];
    }
    const double want_dsc = np + ng == 0 ? 1.0 : 2.0 * inter / static_cast<double>(np + ng);
    if (dsc(pred, gt, 1) != want_dsc) ++mismatches;

    const auto sp = naive_surface(P), sg = naive_surface(G);
    if (sg.empty()) {
      bool threw = false;
      try {
        average_surface_distance(pred, gt, 1);
      } catch (const Error& e) {
        threw = e.code() == ErrorCode::EmptyGTSurface;
      }
      if (!threw) ++mismatches;
      continue;
    }
    ++checked_sd;
    double sum = 0.0;
    for (auto a : sg) sum += nearest(a, sp);
    const double want_sd = sp.empty() ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(sg.size());
    if (average_surface_distance(pred, gt, 1) != want_sd) ++mismatches;
    for (double tau : {0.0, 1.0, 1.5, 2.0}) {
      std::size_t within = 0;
      for (auto a : sg) within += nearest(a, sp) <= tau;
      for (auto a : sp) within += nearest(a, sg) <= tau;
      const double want = static_cast<double>(within) / static_cast<double>(sg.size() + sp.size());
      if (nsd_tolerance(pred, gt, 1, tau) != want) ++mismatches;
    }
  }
  o.note("%zu mask pairs (%zu with a ground-truth surface): %zu mismatches", kMaskPairs, checked_sd, mismatches);

  const Tensor half({1, 2, 2, 2}, 0.5);
  Tensor onehot({1, 2, 2, 2});
  onehot[0] = onehot[1] = onehot[6] = onehot[7] = 1.0;
  const Tensor p1({1, 2, 2}, std::vector<double>{1, 1, 0, 0}), g1({1, 2, 2}, std::vector<double>{0, 0, 1, 1});
  const double mse_half = mse_dataset(std::span(&half, 1), std::span(&onehot, 1));
  const double mse_flip = mse_dataset(std::span(&p1, 1), std::span(&g1, 1));
  const double mse_same = mse_dataset(std::span(&onehot, 1), std::span(&onehot, 1));
  o.note("MSE: uniform 0.5 -> %.17g, flipped 2px -> %.17g, perfect -> %.17g", mse_half, mse_flip, mse_same);
  o.pass = mismatches == 0 && mse_half == 0.25 && mse_flip == 1.0 && mse_same == 0.0;
  return o;
}

// 7: determinism and formats.
Outcome determinism(const fs::path& work, bool have_centers, bool centers_exact) {
  Outcome o;
  RunConfig cfg;
  cfg.network.input_shape = {32, 32};
  cfg.data.synth.shape = {32, 32};
  cfg.data.n_train = 12;
  cfg.data.n_val = 4;
  cfg.loss.mode = LossMode::UncertaintySam;
  cfg.optimizer.sam.enabled = true;
  cfg.epochs = 3;
  cfg.steps_per_epoch = 4;
  cfg.seed = 9;
  bool traces = true;
  std::vector<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    cfg.output_dir = (work / ("determinism" + std::to_string(rep))).string();
    SegModel m = SegModel::create(cfg);
    const auto r = train(m, load_data(cfg));
    std::vector<double> trace;
    for (const auto& e : r.epochs) trace.push_back(e.train_loss);
    if (rep == 0) first = trace;
    traces = traces && trace == first;
  }
  o.note("epoch-loss traces of two identical runs %s", traces ? "bit-identical" : "DIFFER");

  const fs::path run0 = work / "determinism0";
  const SegModel back = SegModel::from_checkpoint(load_checkpoint(run0 / "checkpoints" / "last"));
  SegModel again = SegModel::create(cfg);
  train(again, load_data(cfg), TrainOptions{false, {}});
  const auto a = again.named_tensors(), b = back.named_tensors();
  bool ckpt = a.size() == b.size();
  for (std::size_t i = 0; ckpt && i < a.size(); ++i) ckpt = a[i].name == b[i].name && a[i].tensor == b[i].tensor;
  o.note("checkpoint round trip %s (%zu tensors)", ckpt ? "bit-exact" : "DIFFERS", b.size());

  const Dataset ds = synthesize(cfg.data.synth, split_seeds(3, 5, 0).train);
  write_dataset(ds, work / "dataset");
  const Dataset ds_back = read_dataset(work / "dataset");
  const bool data_ok = ds_back.samples == ds.samples && ds_back.n_classes == ds.n_classes;
  o.note("dataset round trip %s", data_ok ? "bit-exact" : "DIFFERS");

  bool center = centers_exact;
  if (!have_centers) {
    SegModel m = SegModel::create(cfg);
    const Dataset sub = synthesize(cfg.data.synth, split_seeds(0, 4, 0).train);
    SegModel ref = m;
    const double base = dataset_loss(ref, sub);
    DatasetLossModel lm(std::move(m), sub);
    center = evaluate_grid(lm, sample_directions(lm.parameters(), 1), 0.5, 3).center_loss == base;
  }
  o.note("landscape centre cell %s the unperturbed training loss", center ? "equals" : "DIFFERS FROM");
  o.pass = traces && ckpt && data_ok && center;
  return o;
}

void report(int id, const Outcome& o) {
  std::printf("criterion %d: %s\n", id, o.pass ? "PASS" : "FAIL");
  for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  fs::path work = fs::temp_directory_path() / "sharpseg_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only") only = std::atoi(argv[i + 1]);
    if (flag == "--work") work = argv[i + 1];
  }
  fs::remove_all(work);
  fs::create_directories(work);
  auto wanted = [&](int id) { return only == 0 || only == id; };
  const auto t0 = Clock::now();
  bool all = true;
  auto record = [&](int id, const Outcome& o) {
    report(id, o);
    all = all && o.pass;
  };
  try {
    if (wanted(1)) record(1, gradient_audit());
    if (wanted(2)) record(2, loss_oracles());
    if (wanted(3)) record(3, sam_mechanics());
    Ablation ablation;
    bool have_centers = false, centers_exact = false;
    if (wanted(4) || wanted(5)) {
      Outcome four;
      ablation = run_ablation(work / "ablation", four);
      if (wanted(4)) record(4, ablation_direction(ablation, four));
      if (wanted(5)) {
        record(5, flatness(ablation, centers_exact));
        have_centers = true;
      }
    }
    if (wanted(6)) record(6, metric_oracles());
    if (wanted(7)) record(7, determinism(work, have_centers, centers_exact));
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("total %.0f s\n", seconds_since(t0));
  fs::remove_all(work);
  return all ? 0 : 1;
}
