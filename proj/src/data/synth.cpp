#include "sharpseg/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "sharpseg/binary_io.hpp"
#include "sharpseg/error.hpp"
#include "sharpseg/strict_json.hpp"

namespace sharpseg {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::InvalidConfig, "data.synth." + m); };
  if (K < 1 || K > 3) bad("K must be 1, 2 or 3");
  if (shape.size() != 2 && shape.size() != 3) bad("shape must have 2 or 3 axes");
  for (std::size_t e : shape) {
    if (e < 8) bad("shape extents must be at least 8");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be finite and >= 0");
  if (!(deform >= 0.0 && deform < 0.5)) bad("deform must be in [0, 0.5)");
  if (!(imbalance > 0.0 && imbalance < 0.25)) bad("imbalance must be in (0, 0.25)");
}

json SynthConfig::to_json() const {
  return {{"K", K}, {"shape", shape}, {"noise_sigma", noise_sigma}, {"deform", deform}, {"imbalance", imbalance}};
}

SynthConfig SynthConfig::from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  SynthConfig c;
  c.K = o.get("K", c.K);
  c.shape = o.get("shape", c.shape);
  c.noise_sigma = o.get("noise_sigma", c.noise_sigma);
  c.deform = o.get("deform", c.deform);
  c.imbalance = o.get("imbalance", c.imbalance);
  o.finish();
  c.validate();
  return c;
}

std::vector<std::string> class_names(std::size_t K) {
  static const char* names[] = {"background", "RV", "Myo", "LV"};
  std::vector<std::string> out{"background"};
  // Fewer classes drop the outer structures first.
  for (std::size_t k = 1; k <= K; ++k) out.push_back(names[3 - K + k]);
  return out;
}

namespace {

constexpr double kPi = std::numbers::pi;

/// Closed contour r(theta) = r0 (1 + sum_k a_k cos(k theta + phi_k)).
struct Contour {
  double r0 = 0.0;
  std::array<double, 3> amp{};
  std::array<double, 3> phase{};

  double radius(double theta) const {
    double f = 1.0;
    for (std::size_t k = 0; k < amp.size(); ++k) f += amp[k] * std::cos(static_cast<double>(k + 2) * theta + phase[k]);
    return r0 * f;
  }

  static Contour draw(double r0, double deform, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), ph(0.0, 2 * kPi);
    Contour c;
    c.r0 = r0;
    for (std::size_t k = 0; k < c.amp.size(); ++k) {
      c.amp[k] = deform * u(rng) / static_cast<double>(k + 1);
      c.phase[k] = ph(rng);
    }
    return c;
  }
};

}  // namespace

LabeledVolume generate_sample(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const bool volumetric = cfg.shape.size() == 3;
  const std::size_t D = volumetric ? cfg.shape[0] : 1;
  const std::size_t H = cfg.shape[volumetric ? 1 : 0], W = cfg.shape[volumetric ? 2 : 1];
  const double side = static_cast<double>(std::min(H, W));

  // In-plane geometry, in pixels.
  const double cy = 0.5 * static_cast<double>(H) + uniform(-0.08, 0.08) * side;
  const double cx = 0.5 * static_cast<double>(W) + uniform(-0.08, 0.02) * side;
  const double r_lv = uniform(0.11, 0.15) * side;
  const double area = static_cast<double>(H * W);
  const double thick = std::max(1.5, cfg.imbalance * area / (2 * kPi * (r_lv + 0.5)) * uniform(0.85, 1.15));
  const Contour lv = Contour::draw(r_lv, cfg.deform, rng);
  const Contour wall = Contour::draw(r_lv + thick, cfg.deform, rng);
  const double rv_angle = kPi + uniform(-0.5, 0.5);
  const double rv_dist = (r_lv + thick) * uniform(0.55, 0.8);
  const double ry = cy + rv_dist * std::sin(rv_angle), rx = cx + rv_dist * std::cos(rv_angle);
  const Contour rv = Contour::draw((r_lv + thick) * uniform(0.95, 1.2), cfg.deform, rng);

  LabeledVolume v;
  v.shape = cfg.shape;
  v.seed = seed;
  v.spacing.assign(cfg.shape.size(), 1.0);
  v.labels.assign(D * H * W, 0);
  v.image.assign(D * H * W, 0.0f);

  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t z = 0; z < D; ++z) {
    // Along the long axis structures taper towards both ends.
    const double scale =
        volumetric ? 0.55 + 0.45 * std::cos(kPi * (static_cast<double>(z) + 0.5 - 0.5 * D) / static_cast<double>(D))
                   : 1.0;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
        const double dl = std::hypot(py - cy, px - cx), tl = std::atan2(py - cy, px - cx);
        const double dr = std::hypot(py - ry, px - rx), tr = std::atan2(py - ry, px - rx);
        std::uint8_t label = 0;
        if (dl < scale * lv.radius(tl)) {
          label = 3;
        } else if (dl < scale * wall.radius(tl)) {
          label = 2;
        } else if (dr < scale * rv.radius(tr)) {
          label = 1;
        }
        // Reduced class sets keep the innermost structures, relabelled 1..K.
        if (label != 0) label = label + cfg.K > 3 ? static_cast<std::uint8_t>(label + cfg.K - 3) : 0;
        const std::size_t i = (z * H + y) * W + x;
        v.labels[i] = label;
      }
    }
  }
  // Noise is drawn after the geometry so the label map does not depend on
  // noise_sigma.
  for (std::size_t i = 0; i < v.labels.size(); ++i) {
    const std::uint8_t label = v.labels[i];
    const std::size_t cls = label == 0 ? 0 : label + 3 - cfg.K;
    const double value = kClassIntensity[cls] + cfg.noise_sigma * noise(rng);
    v.image[i] = static_cast<float>(std::clamp(value, 0.0, 1.0));
  }
  return v;
}

SeedSplit split_seeds(std::uint64_t base_seed, std::size_t n_train, std::size_t n_val) {
  if (n_train > kValidationSeedOffset || n_val > kValidationSeedOffset) {
    fail(ErrorCode::InvalidConfig, "split sizes exceed the validation seed offset");
  }
  SeedSplit s;
  for (std::size_t i = 0; i < n_train; ++i) s.train.push_back(base_seed + i);
  for (std::size_t i = 0; i < n_val; ++i) s.val.push_back(base_seed + kValidationSeedOffset + i);
  return s;
}

Dataset synthesize(const SynthConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  cfg.validate();
  Dataset d;
  d.n_classes = cfg.K + 1;
  d.class_names = class_names(cfg.K);
  d.provenance = {{"generator", "synthetic"}, {"synth", cfg.to_json()}};
  for (std::uint64_t s : seeds) d.samples.push_back(generate_sample(cfg, s));
  return d;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "samples", ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + (dir / "samples").string() + ": " + ec.message());
  json entries = json::array();
  for (const auto& s : data.samples) {
    if (s.image.size() != s.labels.size()) fail(ErrorCode::ShapeMismatch, "image and labels differ in size");
    const std::string stem = "samples/" + std::to_string(s.seed);
    std::vector<unsigned char> img;
    io::append_le<float>(img, s.image);
    io::write_file(dir / (stem + ".img"), img);
    io::write_file(dir / (stem + ".lbl"), std::span<const unsigned char>(s.labels.data(), s.labels.size()));
    entries.push_back({{"seed", s.seed},
                       {"shape", s.shape},
                       {"spacing", s.spacing},
                       {"image", stem + ".img"},
                       {"labels", stem + ".lbl"}});
  }
  json header = {{"format", "sharpseg-dataset"},
                 {"version", kDatasetVersion},
                 {"byte_order", "little"},
                 {"image_dtype", "float32"},
                 {"label_dtype", "uint8"},
                 {"n_classes", data.n_classes},
                 {"class_names", data.class_names},
                 {"provenance", data.provenance},
                 {"samples", entries}};
  io::write_text(dir / "header.json", header.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  json header;
  try {
    header = json::parse(io::read_text(dir / "header.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptHeader, "header.json: " + std::string(e.what()));
  }
  Dataset d;
  try {
    if (!header.is_object() || header.value("format", "") != "sharpseg-dataset") {
      fail(ErrorCode::CorruptHeader, "header.json is not a dataset header");
    }
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion) fail(ErrorCode::VersionMismatch, "dataset version " + std::to_string(version));
    if (header.at("image_dtype") != "float32" || header.at("label_dtype") != "uint8") {
      fail(ErrorCode::CorruptHeader, "unsupported sample dtypes");
    }
    d.n_classes = header.at("n_classes").get<std::size_t>();
    d.class_names = header.at("class_names").get<std::vector<std::string>>();
    d.provenance = header.value("provenance", json::object());
    for (const auto& e : header.at("samples")) {
      LabeledVolume v;
      v.seed = e.at("seed").get<std::uint64_t>();
      v.shape = e.at("shape").get<std::vector<std::size_t>>();
      v.spacing = e.at("spacing").get<std::vector<double>>();
      std::size_t count = 1;
      for (std::size_t s : v.shape) count *= s;
      if (v.shape.empty() || count == 0) fail(ErrorCode::CorruptHeader, "empty sample shape");
      const auto img = io::read_file(dir / e.at("image").get<std::string>());
      const auto lbl = io::read_file(dir / e.at("labels").get<std::string>());
      if (img.size() < count * sizeof(float) || lbl.size() < count) {
        fail(ErrorCode::TruncatedPayload, "sample " + std::to_string(v.seed) + " payload is shorter than its shape");
      }
      if (img.size() != count * sizeof(float) || lbl.size() != count) {
        fail(ErrorCode::CorruptHeader, "sample " + std::to_string(v.seed) + " payload is longer than its shape");
      }
      v.image = io::read_le<float>(img.data(), count);
      v.labels.assign(lbl.begin(), lbl.end());
      for (std::uint8_t l : v.labels) {
        if (l >= d.n_classes) fail(ErrorCode::CorruptHeader, "label value out of range in sample " + std::to_string(v.seed));
      }
      d.samples.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptHeader, "header.json: " + std::string(e.what()));
  }
  return d;
}

}  // namespace sharpseg
