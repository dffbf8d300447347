#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace sharpseg {

/// Image with its label map. Intensities are stored as 32-bit floats so a
/// dataset written to disk reads back bit-identical.
struct LabeledVolume {
  std::vector<std::size_t> shape;  // 2 or 3 spatial extents
  std::vector<float> image;        // values in [0, 1]
  std::vector<std::uint8_t> labels;  // 0 background, 1..K foreground
  std::uint64_t seed = 0;
  std::vector<double> spacing;

  std::size_t size() const noexcept { return labels.size(); }
  bool operator==(const LabeledVolume&) const = default;
};

/// Cardiac-like phantom: class 3 a disc, class 2 an annulus around it,
/// class 1 a crescent attached to the annulus.
struct SynthConfig {
  std::size_t K = 3;
  std::vector<std::size_t> shape{64, 64};
  double noise_sigma = 0.1;
  /// Amplitude of the low-order radial harmonics that wobble each contour.
  double deform = 0.15;
  /// Target area fraction of the thin annulus (the smallest structure).
  double imbalance = 0.04;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j, const std::string& path = "data.synth");
};

/// Base intensity per class (background first).
inline constexpr std::array<double, 4> kClassIntensity{0.1, 0.6, 0.35, 0.85};
std::vector<std::string> class_names(std::size_t K);

/// Pure in (cfg, seed). InvalidConfig on a bad configuration.
LabeledVolume generate_sample(const SynthConfig& cfg, std::uint64_t seed);

inline constexpr int kDatasetVersion = 1;
inline constexpr std::uint64_t kValidationSeedOffset = 1'000'000;

struct Dataset {
  std::size_t n_classes = 4;  // including background
  std::vector<std::string> class_names;
  std::vector<LabeledVolume> samples;
  nlohmann::json provenance = nlohmann::json::object();
};

/// header.json + samples/{seed}.img (f32 LE) + samples/{seed}.lbl (u8).
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
/// CorruptHeader, VersionMismatch, TruncatedPayload or Io on bad input.
Dataset read_dataset(const std::filesystem::path& dir);

struct SeedSplit {
  std::vector<std::uint64_t> train, val;
};

/// train: base .. base + n_train - 1; val: the same layout shifted by
/// kValidationSeedOffset. Disjoint whenever n_train <= the offset.
SeedSplit split_seeds(std::uint64_t base_seed, std::size_t n_train, std::size_t n_val);

Dataset synthesize(const SynthConfig& cfg, const std::vector<std::uint64_t>& seeds);

}  // namespace sharpseg
