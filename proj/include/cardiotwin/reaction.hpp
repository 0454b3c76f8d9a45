#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cardiotwin/activation.hpp"
#include "cardiotwin/geometry.hpp"
#include "cardiotwin/infarct.hpp"

namespace cardiotwin::reaction {

/// Mitchell-Schaeffer kinetics driven by a rectangular stimulus that starts
/// at the local activation time. tau_close is not a member: it is set per
/// node from the APD field through MsCalibration.
struct ReactionParams {
  double c_m = 1.0;
  double tau_in = 0.3;   // ms
  double tau_out = 6.0;  // ms
  double tau_open = 120.0;
  double u_gate = 0.13;
  double t_foot = 2.0;  // ms
  double i_foot_amp = 0.25;
  double dt = 0.1;      // ms
  double t_end = 500.0;  // ms

  /// Throws ParameterError for dt, T_foot, C_m or time constants <= 0,
  /// u_gate outside (0, 1) or t_end < dt.
  void validate() const;

  /// Step range [on, on + steps) during which the stimulus is applied.
  std::int64_t stimulus_start_step(double t_a) const;
  std::int64_t stimulus_steps() const;
};

struct ApdParams {
  double g_ab = 0.7;
  double g_tm = 0.3;
  double apd_min = 189.4;  // ms
  double apd_max = 330.7;  // ms
  double bz_apd_factor = 1.3;

  void validate() const;
};

/// q = g_ab ab + g_tm tm mapped linearly onto [apd_min, apd_max]; border
/// zone nodes are then scaled by bz_apd_factor. A constant q gives every
/// node the midpoint (with a warning).
std::vector<double> apd_field(const geometry::VentricularCoords& coords, const infarct::TissueMap& tissue,
                              const ApdParams& params);

/// State of one cell.
struct CellState {
  double u = 0.0;
  double w = 1.0;
};

/// One forward-Euler step with stimulus current `i_stim`.
CellState ms_step(const CellState& s, double tau_close, double i_stim, const ReactionParams& p);

/// Single-cell trace (u at every dt) stimulated at t_a, over [0, t_end].
std::vector<double> single_cell_trace(double tau_close, double t_a, double t_end, const ReactionParams& p);

/// APD90 of a trace sampled at `period`: time between the upward and the
/// following downward crossing of 0.1 * peak (linear interpolation). NaN if
/// the cell never repolarizes inside the trace.
double measure_apd90(std::span<const double> u, double period);
double measure_apd90(std::span<const float> u, double period);

/// APD90 of a single cell stimulated at t = 0 and run until it repolarizes.
double single_cell_apd(double tau_close, const ReactionParams& p);

inline constexpr double kCalibrationApdMin = 100.0;
inline constexpr double kCalibrationApdMax = 500.0;

/// Bisection on tau_close; the result reproduces apd_target within 2 ms.
/// Throws CalibrationError outside [100, 500] ms or if the search interval
/// does not bracket the target.
double calibrate_ms_for_apd(double apd_target, const ReactionParams& params);

/// APD -> tau_close table on a 2 ms grid over [100, 500] ms, linearly
/// interpolated. Immutable after construction.
class MsCalibration {
 public:
  explicit MsCalibration(const ReactionParams& params, double spacing_ms = 2.0);

  double tau_close(double apd) const;
  const ReactionParams& params() const { return params_; }

 private:
  ReactionParams params_;
  double spacing_;
  std::vector<double> table_;
};

/// Per-node traces recorded every `record_every` integration steps.
struct VoltageTraces {
  std::size_t nodes = 0;
  std::size_t samples = 0;
  double sample_period = 0.0;  // ms
  std::vector<float> u;        // node-major

  std::span<const float> node(std::size_t i) const { return {u.data() + i * samples, samples}; }
  double time(std::size_t k) const { return static_cast<double>(k) * sample_period; }
};

/// Integrates every node independently with its own tau_close. Requires
/// finite t_a everywhere. Throws IntegrationError (naming the node and dt)
/// when |u| exceeds 2.
VoltageTraces integrate_nodes(const activation::ActivationMap& activation, std::span<const double> tau_close,
                              const ReactionParams& params, std::size_t record_every = 10, unsigned jobs = 1);

/// integrate_nodes with tau_close looked up from the per-node APD.
VoltageTraces simulate_transmembrane(const activation::ActivationMap& activation, std::span<const double> apd,
                                     const MsCalibration& calibration, std::size_t record_every = 10,
                                     unsigned jobs = 1);

/// "CTVOLT1\n" + [node_count u64][t_count u64][f32 node x time].
void write_ctvolt(const std::filesystem::path& path, const VoltageTraces& traces);
VoltageTraces read_ctvolt(const std::filesystem::path& path, double sample_period);

}  // namespace cardiotwin::reaction
