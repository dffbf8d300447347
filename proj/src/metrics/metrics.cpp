#include "sharpseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sharpseg/error.hpp"

namespace sharpseg {

namespace {

void check_pair(const LabelMap& a, const LabelMap& b) {
  if (a.shape != b.shape || a.labels.size() != b.labels.size()) {
    fail(ErrorCode::ShapeMismatch, "label maps " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
  }
  if (numel(a.shape) != a.labels.size()) fail(ErrorCode::ShapeMismatch, "label buffer does not match its shape");
}

double distance(const std::array<long, 3>& a, const std::array<long, 3>& b, const std::array<double, 3>& spacing) {
  double sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = static_cast<double>(a[i] - b[i]) * spacing[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double nearest(const std::array<long, 3>& x, const SurfaceSet& s, const std::array<double, 3>& spacing) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : s.points) best = std::min(best, distance(x, y, spacing));
  return best;
}

std::string number(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

nlohmann::json json_number(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace

double dsc(const LabelMap& pred, const LabelMap& gt, int class_id) {
  check_pair(pred, gt);
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool in_p = pred.labels[i] == class_id, in_g = gt.labels[i] == class_id;
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double mse_dataset(std::span<const Tensor> probs, std::span<const Tensor> targets) {
  if (probs.empty()) fail(ErrorCode::EmptyDataset, "mse over zero samples");
  if (probs.size() != targets.size()) fail(ErrorCode::ShapeMismatch, "prediction and target counts differ");
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (probs[n].shape() != targets[n].shape()) {
      fail(ErrorCode::ShapeMismatch, "sample " + std::to_string(n) + ": " + shape_str(probs[n].shape()) + " vs " +
                                         shape_str(targets[n].shape()));
    }
    double sq = 0.0;
    const auto p = probs[n].data(), g = targets[n].data();
    for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - g[i]) * (p[i] - g[i]);
    total += sq / static_cast<double>(p.size());
  }
  return total / static_cast<double>(probs.size());
}

SurfaceSet extract_surface(std::span<const std::uint8_t> mask, const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 3 || numel(shape) != mask.size()) {
    fail(ErrorCode::ShapeMismatch, "surface extraction needs a 1-3 axis mask matching " + shape_str(shape));
  }
  std::array<long, 3> ext{1, 1, 1};
  const std::size_t off = 3 - shape.size();
  for (std::size_t a = 0; a < shape.size(); ++a) ext[off + a] = static_cast<long>(shape[a]);
  SurfaceSet out;
  auto inside = [&](long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= ext[0] || y >= ext[1] || x >= ext[2]) return false;
    return mask[static_cast<std::size_t>((z * ext[1] + y) * ext[2] + x)] != 0;
  };
  for (long z = 0; z < ext[0]; ++z)
    for (long y = 0; y < ext[1]; ++y)
      for (long x = 0; x < ext[2]; ++x) {
        if (!inside(z, y, x)) continue;
        bool boundary = false;
        // Only real axes have neighbours; padded axes of extent 1 are ignored.
        for (std::size_t a = off; a < 3 && !boundary; ++a) {
          for (long d : {-1L, 1L}) {
            std::array<long, 3> q{z, y, x};
            q[a] += d;
            if (!inside(q[0], q[1], q[2])) boundary = true;
          }
        }
        if (boundary) {
          std::array<long, 3> p{z, y, x};
          std::array<long, 3> coord{0, 0, 0};
          for (std::size_t a = 0; a < shape.size(); ++a) coord[a] = p[off + a];
          out.points.push_back(coord);
        }
      }
  return out;
}

SurfaceSet class_surface(const LabelMap& map, int class_id) {
  std::vector<std::uint8_t> mask(map.labels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = map.labels[i] == class_id;
  return extract_surface(mask, map.shape);
}

double average_surface_distance(const LabelMap& pred, const LabelMap& gt, int class_id, std::array<double, 3> spacing) {
  check_pair(pred, gt);
  const SurfaceSet sg = class_surface(gt, class_id);
  if (sg.points.empty()) fail(ErrorCode::EmptyGTSurface, "class " + std::to_string(class_id) + " absent from gt");
  const SurfaceSet sp = class_surface(pred, class_id);
  if (sp.points.empty()) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& x : sg.points) total += nearest(x, sp, spacing);
  return total / static_cast<double>(sg.points.size());
}

double nsd_tolerance(const LabelMap& pred, const LabelMap& gt, int class_id, double tau, std::array<double, 3> spacing) {
  check_pair(pred, gt);
  if (!(tau >= 0.0)) fail(ErrorCode::InvalidAttr, "nsd tolerance must be non-negative");
  const SurfaceSet sg = class_surface(gt, class_id);
  if (sg.points.empty()) fail(ErrorCode::EmptyGTSurface, "class " + std::to_string(class_id) + " absent from gt");
  const SurfaceSet sp = class_surface(pred, class_id);
  if (sp.points.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& x : sg.points) hits += nearest(x, sp, spacing) <= tau;
  for (const auto& y : sp.points) hits += nearest(y, sg, spacing) <= tau;
  return static_cast<double>(hits) / static_cast<double>(sg.points.size() + sp.points.size());
}

LabelMap argmax_labels(const Tensor& probs) {
  const Shape& s = probs.shape();
  if (s.size() < 3 || s[0] != 1) fail(ErrorCode::ShapeMismatch, "argmax expects [1, K, spatial...]");
  const std::size_t K = s[1], S = probs.size() / K;
  LabelMap out{std::vector<std::size_t>(s.begin() + 2, s.end()), std::vector<std::uint8_t>(S, 0)};
  for (std::size_t i = 0; i < S; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (probs[k * S + i] > probs[best * S + i]) best = k;
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

MetricsReport evaluate_segmentation(std::span<const LabelMap> predictions, std::span<const LabelMap> ground_truth,
                                    std::span<const Tensor> probs, std::span<const Tensor> targets,
                                    std::size_t n_classes, std::vector<double> taus, std::vector<std::string> ids) {
  if (predictions.empty()) fail(ErrorCode::EmptyDataset, "no samples to evaluate");
  if (predictions.size() != ground_truth.size() || probs.size() != predictions.size() ||
      targets.size() != predictions.size()) {
    fail(ErrorCode::ShapeMismatch, "evaluation inputs have different sample counts");
  }
  if (n_classes < 2) fail(ErrorCode::InvalidConfig, "need at least one foreground class");
  if (taus.empty()) taus.push_back(1.0);
  const std::size_t N = predictions.size();
  MetricsReport r;
  r.n_samples = N;
  r.mse = mse_dataset(probs, targets);

  std::vector<double> dsc_sum(n_classes, 0.0), sd_sum(n_classes, 0.0);
  std::vector<std::size_t> sd_count(n_classes, 0);
  std::vector<double> nsd_sum(taus.size(), 0.0);
  std::vector<std::size_t> nsd_count(taus.size(), 0);
  for (std::size_t n = 0; n < N; ++n) {
    SampleMetrics row;
    row.id = n < ids.size() ? ids[n] : std::to_string(n);
    const double sq_mse = mse_dataset(probs.subspan(n, 1), targets.subspan(n, 1));
    row.mse = sq_mse;
    for (std::size_t k = 1; k < n_classes; ++k) {
      const int c = static_cast<int>(k);
      const double d = dsc(predictions[n], ground_truth[n], c);
      row.dsc.push_back(d);
      dsc_sum[k] += d;
      if (class_surface(ground_truth[n], c).points.empty()) {
        row.surface_distance.push_back(std::nullopt);
        row.nsd.push_back(std::nullopt);
        continue;
      }
      const double sd = average_surface_distance(predictions[n], ground_truth[n], c);
      row.surface_distance.push_back(sd);
      sd_sum[k] += sd;
      ++sd_count[k];
      for (std::size_t t = 0; t < taus.size(); ++t) {
        const double v = nsd_tolerance(predictions[n], ground_truth[n], c, taus[t]);
        if (t == 0) row.nsd.push_back(v);
        nsd_sum[t] += v;
        ++nsd_count[t];
      }
    }
    r.samples.push_back(std::move(row));
  }
  double mean = 0.0, sd_mean = 0.0;
  std::size_t sd_classes = 0;
  bool sd_defined = true;
  for (std::size_t k = 1; k < n_classes; ++k) {
    const int c = static_cast<int>(k);
    r.per_class_dsc[c] = dsc_sum[k] / static_cast<double>(N);
    mean += r.per_class_dsc[c];
    if (sd_count[k] == 0 || !std::isfinite(sd_sum[k])) {
      r.surface_distance[c] = std::nullopt;
      sd_defined = false;
    } else {
      r.surface_distance[c] = sd_sum[k] / static_cast<double>(sd_count[k]);
      sd_mean += *r.surface_distance[c];
      ++sd_classes;
    }
  }
  r.mean_dsc = mean / static_cast<double>(n_classes - 1);
  if (sd_defined && sd_classes > 0) r.mean_surface_distance = sd_mean / static_cast<double>(sd_classes);
  for (std::size_t t = 0; t < taus.size(); ++t) {
    r.nsd_tolerance[taus[t]] =
        nsd_count[t] ? std::optional<double>(nsd_sum[t] / static_cast<double>(nsd_count[t])) : std::nullopt;
  }
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::object(), sd = nlohmann::json::object(), nsd = nlohmann::json::object();
  for (const auto& [c, v] : per_class_dsc) per_class[std::to_string(c)] = v;
  for (const auto& [c, v] : surface_distance) sd[std::to_string(c)] = json_number(v);
  for (const auto& [tau, v] : nsd_tolerance) nsd[number(tau)] = json_number(v);
  return {{"n_samples", n_samples},
          {"per_class_dsc", per_class},
          {"mean_dsc", mean_dsc},
          {"mse", mse},
          {"surface_distance", {{"per_class", sd}, {"mean", json_number(mean_surface_distance)}}},
          {"nsd_tolerance", nsd}};
}

std::string MetricsReport::samples_csv() const {
  std::ostringstream os;
  const std::size_t classes = samples.empty() ? 0 : samples.front().dsc.size();
  os << "sample,mse";
  for (std::size_t k = 1; k <= classes; ++k) os << ",dsc_" << k << ",surface_distance_" << k << ",nsd_" << k;
  os << "\n";
  for (const auto& s : samples) {
    os << s.id << "," << number(s.mse);
    for (std::size_t k = 0; k < classes; ++k) {
      os << "," << number(s.dsc[k]) << "," << number(s.surface_distance[k]) << "," << number(s.nsd[k]);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace sharpseg
