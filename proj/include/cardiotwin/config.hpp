#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardiotwin/activation.hpp"
#include "cardiotwin/geometry.hpp"
#include "cardiotwin/infarct.hpp"
#include "cardiotwin/reaction.hpp"

namespace cardiotwin {

/// Every stage parameter in one place. Defaults carry the published values
/// where they exist (velocities, scar/BZ scales, APD bounds, BZ radius,
/// edge length).
struct RunConfig {
  double edge = 0.15;  // cm
  std::uint64_t mesh_seed = 7;
  geometry::WallParams wall;
  double alpha_endo = 60.0;  // degrees
  double alpha_epi = -60.0;
  geometry::ElectrodeLayout electrodes;

  double sigma = infarct::kDefaultSigma;
  double bz_radius = infarct::kDefaultBzRadius;
  std::string catalog_path;  // optional scenario overrides (JSON)

  activation::ConductionParams conduction;
  double eikonal_tol_ms = 0.01;

  reaction::ReactionParams reaction;
  reaction::ApdParams apd;
  double record_period_ms = 1.0;

  std::size_t sample_nodes = 4096;
  std::size_t ecg_samples = 512;
  std::size_t healthy_replicates = 8;
  double root_jitter_ms = 2.0;

  /// Throws ParameterError for any invalid sub-block.
  void validate() const;

  /// Integration steps between recorded samples.
  std::size_t record_every() const;

  /// Deterministic single-line JSON of every field.
  std::string to_json() const;
};

/// Catalog with the overrides from `path` applied: a JSON array of objects
/// {"name", optional "tau_base", "lambda", "region"}; names must exist.
/// sigma and bz_radius come from the config.
std::vector<infarct::Scenario> load_catalog(const RunConfig& config);

}  // namespace cardiotwin
