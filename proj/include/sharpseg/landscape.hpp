#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpseg/params.hpp"

namespace sharpseg {

/// Anything whose scalar loss can be evaluated at its current parameters.
class LossModel {
 public:
  virtual ~LossModel() = default;
  /// Tensors the landscape perturbs, in a fixed order.
  virtual ParamList parameters() = 0;
  /// Loss at the current parameter values. May throw Error(NonFinite).
  virtual double loss() = 0;
  /// Independent copy for parallel evaluation.
  virtual std::unique_ptr<LossModel> clone() const = 0;
};

/// One tensor per perturbed parameter, same names and shapes.
using Direction = std::vector<NamedTensor>;

struct DirectionPair {
  Direction d1, d2;
  std::uint64_t seed = 0;
  /// Filters whose weight norm is zero; their direction entries are zero.
  std::size_t zero_weight_filters = 0;
};

/// Gaussian directions normalized per filter (slice along axis 0) to the
/// norm of the matching weight filter. Tensors of rank <= 1 (biases, norm
/// scales, sigma) get zero directions. d2 is drawn the same way and then
/// made orthogonal to d1 in the flattened space.
DirectionPair sample_directions(const ParamList& weights, std::uint64_t seed);

double dot(const Direction& a, const Direction& b);

struct LandscapeGrid {
  std::vector<double> alphas, betas;
  /// losses[i * betas.size() + j] at alpha_i, beta_j; NaN where not finite.
  std::vector<double> losses;
  std::vector<bool> finite;
  double center_loss = 0.0;
  std::uint64_t direction_seed = 0;
  std::string config_hash;

  double at(std::size_t i, std::size_t j) const { return losses[i * betas.size() + j]; }
  nlohmann::json to_json() const;
  std::string to_csv() const;
  /// Binary greyscale PGM, min loss black, max loss white.
  std::string to_pgm() const;
};

/// Loss at theta + alpha d1 + beta d2 over a steps x steps grid spanning
/// [-extent, extent]^2. InvalidAttr unless steps is odd and extent >= 0.
/// Parameters are bit-identical to their input values afterwards. With
/// workers > 1, cells are split across clones of the model.
LandscapeGrid evaluate_grid(LossModel& model, const DirectionPair& dirs, double extent, std::size_t steps,
                            std::size_t workers = 1);

/// max - min of the finite losses with alpha^2 + beta^2 <= radius^2.
double flatness_range(const LandscapeGrid& grid, double radius = 0.25);

/// Largest loss increase over `n_directions` random directions of global
/// norm rho (Gaussian, normalized over all parameters).
double sharpness_proxy(LossModel& model, double rho = 0.05, std::size_t n_directions = 32, std::uint64_t seed = 0);

void write_landscape(const LandscapeGrid& grid, const std::filesystem::path& dir);

}  // namespace sharpseg
