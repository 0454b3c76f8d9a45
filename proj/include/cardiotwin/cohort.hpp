#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cardiotwin/activation.hpp"
#include "cardiotwin/config.hpp"
#include "cardiotwin/ecg.hpp"
#include "cardiotwin/infarct.hpp"
#include "cardiotwin/pipeline.hpp"
#include "cardiotwin/reaction.hpp"
#include "cardiotwin/sample_io.hpp"

namespace cardiotwin::cohort {

/// Farthest-point sampling from a seeded start node (ties to the lowest
/// index), returned in ascending order. Throws ValidationError when the mesh
/// has fewer nodes than requested.
std::vector<std::uint32_t> subsample_nodes(const Mesh& mesh, std::size_t count, std::uint64_t seed);

/// Per-mesh state shared by every scenario run on that mesh.
struct PreparedMesh {
  std::string id;
  pipeline::Annotated annotated;
  ecg::LeadField lead_field;
  std::vector<std::uint32_t> sample_nodes;
};

PreparedMesh prepare_mesh(std::string id, pipeline::Annotated annotated, const RunConfig& config,
                          std::uint64_t sampling_seed);

struct ScenarioResult {
  infarct::TissueMap tissue;
  activation::RootSet roots;
  activation::ActivationMap activation;
  std::vector<double> apd;
  ecg::EcgRecord record;  // normalized, config.ecg_samples long
  CohortSample sample;
};

/// Options for one forward run. `noise` may hold a precomputed noise field
/// for the scenario seed; `root_jitter_seed` (non-zero) shifts root onsets
/// by U(-J, J) draws re-based so the earliest root fires at 0.
struct RunOptions {
  const std::vector<double>* noise = nullptr;
  std::uint64_t root_jitter_seed = 0;
  unsigned jobs = 1;
};

/// infarct -> activation -> reaction -> ecg -> (X, S, Y). Deterministic
/// per (mesh, scenario, seed, config). Stage errors are rethrown with the
/// scenario name prepended.
ScenarioResult run_scenario(const PreparedMesh& prepared, const infarct::Scenario& scenario, std::uint64_t seed,
                            const RunConfig& config, const reaction::MsCalibration& calibration,
                            const RunOptions& options = {});

/// Seeds used by the cohort generator: transmural and subendocardial
/// variants of a location share one seed (and therefore one noise field).
std::uint64_t scenario_seed(std::uint64_t cohort_seed, std::size_t mesh_index, const infarct::Scenario& scenario);
std::uint64_t replicate_seed(std::uint64_t cohort_seed, std::size_t mesh_index, std::size_t replicate);

/// Split by mesh position: first 70% train, next 15% val, rest test.
std::string split_for(std::size_t mesh_index, std::size_t mesh_count);

struct CohortReport {
  std::size_t samples = 0;
  std::size_t failures = 0;
  std::vector<ManifestRow> rows;
};

/// Writes <out>/<mesh_id>/<scenario>.ctsamp for every (mesh, scenario),
/// <out>/<mesh_id>/healthy_replicates/rep_NN.ctecg, manifest.csv,
/// replicates.csv and config.json. Failed runs are recorded in the
/// manifest instead of aborting the cohort.
CohortReport generate_cohort(const std::vector<std::filesystem::path>& mesh_files,
                             const std::filesystem::path& out_dir, std::uint64_t seed, const RunConfig& config,
                             unsigned jobs);

/// Same, from meshes already in memory (ids must be unique).
CohortReport generate_cohort(const std::vector<std::pair<std::string, pipeline::Annotated>>& meshes,
                             const std::filesystem::path& out_dir, std::uint64_t seed, const RunConfig& config,
                             unsigned jobs);

}  // namespace cardiotwin::cohort
