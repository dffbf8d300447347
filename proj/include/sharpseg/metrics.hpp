#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpseg/tensor.hpp"

namespace sharpseg {

/// Integer label map with 2 or 3 spatial axes, raster (row-major) order.
struct LabelMap {
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// 2|P & G| / (|P| + |G|) for one class; 1 when both are empty.
double dsc(const LabelMap& pred, const LabelMap& gt, int class_id);

/// Mean over samples of the per-sample mean squared difference between
/// probabilities and one-hot targets (all classes and pixels).
/// EmptyDataset for no samples; ShapeMismatch on unequal shapes.
double mse_dataset(std::span<const Tensor> probs, std::span<const Tensor> targets);

/// Boundary voxels of a binary mask under face connectivity: a voxel is on
/// the surface if a face neighbour is outside the mask or the volume.
struct SurfaceSet {
  std::vector<std::array<long, 3>> points;  // raster order, unused axes 0
};

SurfaceSet extract_surface(std::span<const std::uint8_t> mask, const std::vector<std::size_t>& shape);
SurfaceSet class_surface(const LabelMap& map, int class_id);

/// (1 / |S_gt|) sum over gt surface points of the distance to the nearest
/// predicted surface point. EmptyGTSurface when the class is absent from
/// gt; +infinity when it is absent from the prediction.
double average_surface_distance(const LabelMap& pred, const LabelMap& gt, int class_id,
                                std::array<double, 3> spacing = {1.0, 1.0, 1.0});

/// Fraction of both surfaces lying within tau of the other one.
/// EmptyGTSurface when gt lacks the class; 0 when the prediction does.
double nsd_tolerance(const LabelMap& pred, const LabelMap& gt, int class_id, double tau = 1.0,
                     std::array<double, 3> spacing = {1.0, 1.0, 1.0});

struct SampleMetrics {
  std::string id;
  std::vector<double> dsc;                           // per foreground class
  double mse = 0.0;
  std::vector<std::optional<double>> surface_distance;  // per foreground class
  std::vector<std::optional<double>> nsd;               // per foreground class at the first tau
};

struct MetricsReport {
  std::map<int, double> per_class_dsc;
  double mean_dsc = 0.0;
  double mse = 0.0;
  /// Per class mean of the literal surface distance; nullopt when undefined
  /// for any sample (missing prediction) or for every sample.
  std::map<int, std::optional<double>> surface_distance;
  std::optional<double> mean_surface_distance;
  std::map<double, std::optional<double>> nsd_tolerance;
  std::size_t n_samples = 0;
  std::vector<SampleMetrics> samples;

  nlohmann::json to_json() const;
  /// One row per sample.
  std::string samples_csv() const;
};

/// predictions: argmax label maps; probs / targets: [1, K, spatial...] per
/// sample. Foreground classes 1..K-1 are reported.
MetricsReport evaluate_segmentation(std::span<const LabelMap> predictions, std::span<const LabelMap> ground_truth,
                                    std::span<const Tensor> probs, std::span<const Tensor> targets,
                                    std::size_t n_classes, std::vector<double> taus = {1.0},
                                    std::vector<std::string> ids = {});

/// Argmax over axis 1 of a [1, K, spatial...] probability tensor.
LabelMap argmax_labels(const Tensor& probs);

}  // namespace sharpseg
