#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cardiotwin/ecg.hpp"

namespace cardiotwin::analysis {

/// Symmetric step pattern, |a_i - b_j| local cost, no window. Throws
/// ValidationError on an empty series.
double dtw(std::span<const double> a, std::span<const double> b);

struct DtwMatrix {
  std::vector<std::string> names;
  std::vector<double> max;  // n x n row-major, max over leads
  std::vector<double> avg;  // n x n row-major, mean over leads

  std::size_t size() const { return names.size(); }
  double max_at(std::size_t i, std::size_t j) const { return max[i * size() + j]; }
  double avg_at(std::size_t i, std::size_t j) const { return avg[i * size() + j]; }
};

/// Per-pair DTW on every lead. Records must share the sample count.
/// Each pair is computed once and mirrored, so the result is symmetric with
/// an exact zero diagonal and does not depend on `jobs`.
DtwMatrix dtw_matrix(const std::vector<ecg::EcgRecord>& records, const std::vector<std::string>& names,
                     unsigned jobs = 1);

struct PhenotypeFeatures {
  double qrs_onset_ms = 0.0;
  double qrs_offset_ms = 0.0;
  double t_peak_ms = 0.0;
  double t_end_ms = 0.0;
  double qrs_duration_ms = 0.0;
  double qt_interval_ms = 0.0;
  std::array<double, ecg::kLeadCount> r_amplitude{};   // max |x| inside the QRS
  std::array<double, ecg::kLeadCount> st_amplitude{};  // mean over [offset, offset + 40 ms]
  std::array<double, ecg::kLeadCount> t_amplitude{};   // value at the T peak
  // Lead averages of the magnitudes above (signed ST and T values would
  // cancel across leads of opposite polarity).
  double r_amplitude_mean = 0.0;
  double st_amplitude_mean = 0.0;
  double t_amplitude_mean = 0.0;
};

inline constexpr double kQrsThreshold = 0.10;   // fraction of the max RMS derivative
inline constexpr double kQrsWindow = 0.40;      // QRS offset searched in this leading fraction
inline constexpr double kStWindowMs = 40.0;
inline constexpr double kTEndThreshold = 0.05;  // fraction of the T-peak RMS

/// Throws FeatureError when no QRS can be detected (flat record).
PhenotypeFeatures extract_features(const ecg::EcgRecord& record);

/// Flattened feature vector: the five scalar features, then r/st/t per lead.
std::vector<std::string> feature_names();
std::vector<double> feature_vector(const PhenotypeFeatures& f);

inline constexpr std::size_t kMinReplicates = 8;
inline constexpr double kMinStd = 1e-12;

struct ZScoreTable {
  std::vector<std::string> features;
  std::vector<std::string> scenarios;
  std::vector<double> z;  // scenarios x features; NaN marks not-applicable

  double at(std::size_t s, std::size_t f) const { return z[s * features.size() + f]; }
  bool na(std::size_t s, std::size_t f) const;
  /// Column index; throws ValidationError for an unknown feature.
  std::size_t column(const std::string& feature) const;
};

/// z = (x - mean_healthy) / std_healthy with the sample standard deviation.
/// Needs at least kMinReplicates replicates.
ZScoreTable zscores(const std::vector<PhenotypeFeatures>& scenarios, const std::vector<std::string>& names,
                    const std::vector<PhenotypeFeatures>& healthy);

/// Mean |z| over the per-lead ST columns of one row, skipping NA entries
/// (NaN when every entry is NA).
double st_abs_z(const ZScoreTable& table, std::size_t row);
/// |z| of QRS duration (NaN when NA).
double qrs_abs_z(const ZScoreTable& table, std::size_t row);

/// Group means of a per-row metric over transmural and subendocardial
/// scenarios, identified by their name prefix.
struct GroupContrast {
  double transmural = 0.0;
  double subendocardial = 0.0;
  std::size_t transmural_rows = 0;
  std::size_t subendocardial_rows = 0;
};
GroupContrast contrast(const ZScoreTable& table, double (*metric)(const ZScoreTable&, std::size_t));

struct CohortAnalysis {
  DtwMatrix dtw;      // averaged over meshes
  ZScoreTable z;      // averaged over meshes
  GroupContrast st;
  GroupContrast qrs;
  std::size_t meshes = 0;
};

/// Reads a cohort directory (manifest.csv, samples, replicates.csv) and
/// writes dtw_max.csv, dtw_avg.csv, features.csv, zscores.csv, SVG heatmaps
/// and analysis.json into `out_dir`.
CohortAnalysis analyze_cohort(const std::filesystem::path& cohort_dir, const std::filesystem::path& out_dir,
                              unsigned jobs = 1);

/// Heatmap of a row-major matrix; NaN cells are drawn grey.
std::string heatmap_svg(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::vector<double>& values, bool diverging);

}  // namespace cardiotwin::analysis
