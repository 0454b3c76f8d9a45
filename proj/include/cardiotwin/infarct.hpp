#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cardiotwin/geometry.hpp"

namespace cardiotwin::infarct {

enum class Tissue : std::uint8_t { normal = 0, scar = 1, bz = 2 };

struct TissueMap {
  std::vector<Tissue> labels;
  bool degenerate = false;  // scar thresholding selected no node

  std::size_t size() const { return labels.size(); }
  std::size_t count(Tissue t) const;
  static TissueMap healthy(std::size_t nodes) { return {std::vector<Tissue>(nodes, Tissue::normal), false}; }
};

/// Scar := { x in region : N(x) > tau_base + lambda * (1 - tm(x)) }.
struct ScarParams {
  double tau_base = 0.5;
  double lambda = 0.05;
  double sigma = 0.5;      // cm, noise correlation length
  double bz_radius = 0.2;  // cm
  std::vector<int> region;  // AHA segments 1..17
  std::uint64_t seed = 0;

  /// Throws ParameterError when sigma <= 0, bz_radius < 0, lambda < 0 or the
  /// region is empty or names a segment outside 1..17.
  void validate() const;
};

enum class Location : std::uint8_t {
  septal,
  apical,
  ext_anterior,
  lim_anterior,
  lateral_large,
  lateral_small,
  inferior,
  inferolateral,
};
inline constexpr std::size_t kLocationCount = 8;

enum class Transmurality : std::uint8_t { none, subendocardial, transmural };

struct Scenario {
  std::string name;  // "<transmurality>_<location>" or "healthy"
  bool healthy = false;
  Location location = Location::septal;
  Transmurality transmurality = Transmurality::none;
  ScarParams params;
};

std::string_view location_name(Location l);
std::string_view transmurality_name(Transmurality t);

/// Catalog defaults (the location rows share one noise field per seed, so
/// transmural and subendocardial variants differ only in lambda).
inline constexpr double kLambdaTransmural = 0.05;
inline constexpr double kLambdaSubendocardial = 0.6;
inline constexpr double kDefaultSigma = 0.5;
inline constexpr double kDefaultBzRadius = 0.2;

/// Fixed 17-entry catalog: for each location the subendocardial then the
/// transmural variant, healthy last.
std::vector<Scenario> scenario_catalog();

/// Throws ValidationError for an unknown name.
Scenario find_scenario(std::string_view name);

/// Per-node uniform draws smoothed with a Gaussian kernel of bandwidth sigma
/// over neighbours within 3 sigma, then rescaled to [0, 1]. Deterministic
/// for a fixed seed and independent of `jobs`.
std::vector<double> correlated_noise_field(const Mesh& mesh, double sigma, std::uint64_t seed, unsigned jobs = 1);

/// Scar labels from a noise field (no border zone). A scar set that comes
/// out empty logs a warning and sets `degenerate`.
TissueMap synthesize_scar(std::span<const double> noise, const geometry::VentricularCoords& coords,
                          const ScarParams& params);

/// Every normal node within bz_radius (inclusive) of a scar node becomes bz.
TissueMap grow_border_zone(const Mesh& mesh, const TissueMap& scar, double bz_radius);

}  // namespace cardiotwin::infarct
