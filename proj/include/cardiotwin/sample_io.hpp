#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cardiotwin::cohort {

inline constexpr std::size_t kXColumns = 7;  // x, y, z, tm, ab, rt, tv
inline constexpr std::size_t kLabelCount = 3;  // normal, scar, bz

/// One exported (X, S, Y) triple.
struct CohortSample {
  std::size_t nodes = 0;    // V
  std::size_t samples = 0;  // T
  std::vector<float> x;     // V x 7, row-major
  std::vector<float> s;     // T x 8, row-major
  std::vector<std::uint8_t> y;  // V class indices
  std::string metadata;     // single-line JSON

  /// One-hot expansion of y (V x 3).
  std::vector<std::uint8_t> one_hot() const;
};

/// Layout (little-endian):
///   "CTSAMP1\n" [meta_len u32][meta JSON] [V u32][T u32]
///   [X f32 V x 7][S f32 T x 8][Y u8 V]
void write_sample(const std::filesystem::path& path, const CohortSample& sample);
CohortSample read_sample(const std::filesystem::path& path);

/// Problems with a sample's schema (empty when valid): V, T, column
/// counts, finite values, labels in {0, 1, 2}.
std::vector<std::string> check_sample(const CohortSample& sample, std::size_t expected_nodes,
                                      std::size_t expected_samples);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct ManifestRow {
  std::string file;  // relative to the cohort directory
  std::string mesh_id;
  std::string scenario;
  std::string transmurality;
  std::uint64_t seed = 0;
  std::string sha256;
  std::string split;
  std::string status;  // "ok" or "failed: <reason>"
};

inline constexpr const char* kManifestName = "manifest.csv";
inline constexpr const char* kReplicateManifestName = "replicates.csv";

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

struct ValidationReport {
  std::size_t checked = 0;
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

/// Re-checks a cohort directory (manifest checksums, sample schema,
/// replicate records) or a single .ctmesh / .ctecg / .ctsamp file.
ValidationReport validate_path(const std::filesystem::path& path, std::size_t expected_nodes = 4096,
                               std::size_t expected_samples = 512);

}  // namespace cardiotwin::cohort
