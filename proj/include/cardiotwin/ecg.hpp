#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cardiotwin/geometry.hpp"
#include "cardiotwin/reaction.hpp"

namespace cardiotwin::ecg {

inline constexpr std::size_t kLeadCount = 8;
inline constexpr std::array<std::string_view, kLeadCount> kLeadNames = {"I",  "II", "V1", "V2",
                                                                        "V3", "V4", "V5", "V6"};
inline constexpr std::size_t kSamples = 512;

/// Per-node weights so that phi_e(t) = sum_i w[e][i] u_i(t) equals
/// -sum_elements vol grad(U) . grad(1/r), with grad(1/r) taken at the
/// element centroid. Throws PlacementError when an electrode lies inside an
/// element or on a centroid.
struct LeadField {
  std::array<std::vector<double>, geometry::kElectrodeCount> weights;
};

LeadField lead_field(const Mesh& mesh, const geometry::ElectrodeSet& electrodes);

/// Electrode potentials over time, electrode-major.
struct Potentials {
  std::array<std::vector<double>, geometry::kElectrodeCount> phi;
  double sample_period = 0.0;  // ms
};

/// Node sums run in fixed node order, so results are bit-reproducible.
Potentials electrode_potentials(const LeadField& field, const reaction::VoltageTraces& traces);
Potentials electrode_potentials(const Mesh& mesh, const reaction::VoltageTraces& traces,
                                const geometry::ElectrodeSet& electrodes);

struct EcgRecord {
  std::array<std::vector<double>, kLeadCount> leads;
  double sample_period = 0.0;  // ms
  std::string scenario;
  std::uint64_t seed = 0;
  bool normalized = false;
  double scale = 1.0;  // divisor applied during normalisation
  std::string metadata;  // single-line JSON carried into files

  std::size_t samples() const { return leads[0].size(); }
};

/// I = LA - RA, II = LL - RA, Vi = phi_Vi - (RA + LA + LL) / 3. Throws
/// ValidationError if an electrode series is missing or lengths differ.
EcgRecord derive_leads(const Potentials& potentials);

/// Linear resampling of [0, (n-1) * period] to `t_out` samples followed by
/// division by the global max |sample|. All-zero records are left
/// unscaled with normalized = false and a warning.
EcgRecord normalize_and_resample(const EcgRecord& record, std::size_t t_out = kSamples);

/// Text header of "# key: value" lines, a CSV header row and one row per
/// sample (%.9g). Reading back and writing again reproduces the file byte
/// for byte.
void write_ctecg(const std::filesystem::path& path, const EcgRecord& record);
EcgRecord read_ctecg(const std::filesystem::path& path);

}  // namespace cardiotwin::ecg
