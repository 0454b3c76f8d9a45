#include "cardiotwin/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"
#include "cardiotwin/parallel.hpp"

namespace cardiotwin::reaction {

void ReactionParams::validate() const {
  auto fail = [](const char* msg) { throw ParameterError(std::string("reaction: ") + msg); };
  if (!(dt > 0.0)) fail("dt must be positive");
  if (!(t_foot > 0.0)) fail("T_foot must be positive");
  if (!(c_m > 0.0)) fail("C_m must be positive");
  if (!(tau_in > 0.0 && tau_out > 0.0 && tau_open > 0.0)) fail("time constants must be positive");
  if (!(u_gate > 0.0 && u_gate < 1.0)) fail("u_gate must lie in (0, 1)");
  if (!(t_end >= dt)) fail("t_end must be at least one step");
  if (!std::isfinite(i_foot_amp)) fail("stimulus amplitude must be finite");
}

std::int64_t ReactionParams::stimulus_start_step(double t_a) const {
  return static_cast<std::int64_t>(std::ceil(t_a / dt - 1e-9));
}

std::int64_t ReactionParams::stimulus_steps() const {
  return std::max<std::int64_t>(1, std::llround(t_foot / dt));
}

void ApdParams::validate() const {
  if (!(apd_min < apd_max)) throw ParameterError("apd: apd_min must be below apd_max");
  if (!(apd_min > 0.0)) throw ParameterError("apd: apd_min must be positive");
  if (!(bz_apd_factor >= 1.0)) throw ParameterError("apd: bz_apd_factor must be >= 1");
  if (!std::isfinite(g_ab) || !std::isfinite(g_tm)) throw ParameterError("apd: gradient weights must be finite");
}

std::vector<double> apd_field(const geometry::VentricularCoords& coords, const infarct::TissueMap& tissue,
                              const ApdParams& params) {
  params.validate();
  const std::size_t n = coords.size();
  if (tissue.size() != n) throw ValidationError("tissue map and coordinates cover different node sets");
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = params.g_ab * coords.ab[i] + params.g_tm * coords.tm[i];
  std::vector<double> apd(n, 0.5 * (params.apd_min + params.apd_max));
  if (n > 0) {
    auto [lo, hi] = std::minmax_element(q.begin(), q.end());
    const double q_min = *lo, q_max = *hi;
    if (q_max > q_min) {
      for (std::size_t i = 0; i < n; ++i) {
        if (q[i] == q_min)
          apd[i] = params.apd_min;
        else if (q[i] == q_max)
          apd[i] = params.apd_max;
        else
          apd[i] = params.apd_min + (params.apd_max - params.apd_min) * (q[i] - q_min) / (q_max - q_min);
      }
    } else {
      log::warn("APD gradient field is constant; every node gets the midpoint APD");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (tissue.labels[i] == infarct::Tissue::bz) apd[i] *= params.bz_apd_factor;
  return apd;
}

CellState ms_step(const CellState& s, double tau_close, double i_stim, const ReactionParams& p) {
  const double du = s.w * s.u * s.u * (1.0 - s.u) / p.tau_in - s.u / p.tau_out + i_stim / p.c_m;
  const double dw = s.u < p.u_gate ? (1.0 - s.w) / p.tau_open : -s.w / tau_close;
  return {s.u + p.dt * du, s.w + p.dt * dw};
}

std::vector<double> single_cell_trace(double tau_close, double t_a, double t_end, const ReactionParams& p) {
  p.validate();
  const auto steps = static_cast<std::int64_t>(std::llround(t_end / p.dt));
  const auto on = p.stimulus_start_step(t_a), off = on + p.stimulus_steps();
  std::vector<double> u(static_cast<std::size_t>(steps) + 1);
  CellState s;
  u[0] = s.u;
  for (std::int64_t n = 0; n < steps; ++n) {
    s = ms_step(s, tau_close, n >= on && n < off ? p.i_foot_amp : 0.0, p);
    u[static_cast<std::size_t>(n) + 1] = s.u;
  }
  return u;
}

namespace {

template <typename T>
double apd90(std::span<const T> u, double period) {
  if (u.size() < 2) return std::nan("");
  const auto peak_it = std::max_element(u.begin(), u.end());
  const double peak = *peak_it;
  if (!(peak > 0.0)) return std::nan("");
  const double level = 0.1 * peak;
  const auto peak_idx = static_cast<std::size_t>(peak_it - u.begin());
  double up = std::nan("");
  for (std::size_t k = 0; k < peak_idx; ++k)
    if (u[k] < level && u[k + 1] >= level) {
      up = (static_cast<double>(k) + (level - u[k]) / (static_cast<double>(u[k + 1]) - u[k])) * period;
      break;
    }
  if (std::isnan(up)) return up;
  for (std::size_t k = peak_idx; k + 1 < u.size(); ++k)
    if (u[k] >= level && u[k + 1] < level) {
      double down = (static_cast<double>(k) + (u[k] - level) / (static_cast<double>(u[k]) - u[k + 1])) * period;
      return down - up;
    }
  return std::nan("");
}

}  // namespace

double measure_apd90(std::span<const double> u, double period) { return apd90(u, period); }
double measure_apd90(std::span<const float> u, double period) { return apd90(u, period); }

double single_cell_apd(double tau_close, const ReactionParams& p) {
  p.validate();
  const auto off = p.stimulus_steps();
  const auto max_steps = static_cast<std::int64_t>(std::llround(5000.0 / p.dt));
  std::vector<double> u{0.0};
  CellState s;
  double peak = 0.0;
  for (std::int64_t n = 0; n < max_steps; ++n) {
    s = ms_step(s, tau_close, n < off ? p.i_foot_amp : 0.0, p);
    u.push_back(s.u);
    peak = std::max(peak, s.u);
    if (n >= off && peak > 0.5 && s.u < 0.1 * peak) break;
  }
  return measure_apd90(std::span<const double>(u), p.dt);
}

double calibrate_ms_for_apd(double apd_target, const ReactionParams& params) {
  params.validate();
  if (!(apd_target >= kCalibrationApdMin && apd_target <= kCalibrationApdMax)) {
    std::ostringstream ss;
    ss << "APD target " << apd_target << " ms outside [" << kCalibrationApdMin << ", " << kCalibrationApdMax << "]";
    throw CalibrationError(ss.str());
  }
  double lo = 10.0, hi = 1000.0;
  const double apd_lo = single_cell_apd(lo, params), apd_hi = single_cell_apd(hi, params);
  if (!(apd_lo < apd_target && apd_target < apd_hi))
    throw CalibrationError("tau_close search interval does not bracket the APD target");
  for (int it = 0; it < 60 && hi - lo > 1e-7; ++it) {
    double mid = 0.5 * (lo + hi);
    double apd = single_cell_apd(mid, params);
    if (std::isnan(apd) || apd > apd_target)
      hi = mid;
    else
      lo = mid;
  }
  const double tau = 0.5 * (lo + hi);
  if (!(std::abs(single_cell_apd(tau, params) - apd_target) < 2.0))
    throw CalibrationError("calibrated tau_close misses the APD target by more than 2 ms");
  return tau;
}

MsCalibration::MsCalibration(const ReactionParams& params, double spacing_ms) : params_(params), spacing_(spacing_ms) {
  params_.validate();
  if (!(spacing_ms > 0.0)) throw ParameterError("calibration grid spacing must be positive");
  const auto count = static_cast<std::size_t>(std::ceil((kCalibrationApdMax - kCalibrationApdMin) / spacing_ - 1e-9));
  table_.resize(count + 1);
  for (std::size_t k = 0; k <= count; ++k)
    table_[k] = calibrate_ms_for_apd(std::min(kCalibrationApdMax, kCalibrationApdMin + spacing_ * k), params_);
}

double MsCalibration::tau_close(double apd) const {
  if (!(apd >= kCalibrationApdMin && apd <= kCalibrationApdMax)) {
    std::ostringstream ss;
    ss << "APD " << apd << " ms outside the calibrated range";
    throw CalibrationError(ss.str());
  }
  const double x = (apd - kCalibrationApdMin) / spacing_;
  auto k = std::min(static_cast<std::size_t>(x), table_.size() - 2);
  const double a_lo = kCalibrationApdMin + spacing_ * static_cast<double>(k);
  const double a_hi = std::min(kCalibrationApdMax, a_lo + spacing_);
  const double frac = (apd - a_lo) / (a_hi - a_lo);
  return table_[k] + frac * (table_[k + 1] - table_[k]);
}

VoltageTraces simulate_transmembrane(const activation::ActivationMap& activation, std::span<const double> apd,
                                     const MsCalibration& calibration, std::size_t record_every, unsigned jobs) {
  if (apd.size() != activation.t_ms.size())
    throw ValidationError("APD field and activation map cover different node sets");
  std::vector<double> tau(apd.size());
  for (std::size_t i = 0; i < apd.size(); ++i) tau[i] = calibration.tau_close(apd[i]);
  return integrate_nodes(activation, tau, calibration.params(), record_every, jobs);
}

VoltageTraces integrate_nodes(const activation::ActivationMap& activation, std::span<const double> tau,
                              const ReactionParams& p, std::size_t record_every, unsigned jobs) {
  p.validate();
  const std::size_t n = activation.t_ms.size();
  if (tau.size() != n) throw ValidationError("tau_close field and activation map cover different node sets");
  if (record_every == 0) throw ParameterError("record_every must be positive");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(activation.t_ms[i])) {
      std::ostringstream ss;
      ss << "node " << i << " has no activation time";
      throw ValidationError(ss.str());
    }

  const auto steps = static_cast<std::int64_t>(std::llround(p.t_end / p.dt));
  VoltageTraces out;
  out.nodes = n;
  out.samples = static_cast<std::size_t>(steps) / record_every + 1;
  out.sample_period = p.dt * static_cast<double>(record_every);
  out.u.assign(n * out.samples, 0.0f);
  const auto len = p.stimulus_steps();
  const auto every = static_cast<std::int64_t>(record_every);

  parallel_for(n, jobs, [&](std::size_t i) {
    float* row = out.u.data() + i * out.samples;
    const auto on = p.stimulus_start_step(activation.t_ms[i]);
    CellState s;
    // Before the stimulus the cell sits exactly at rest (u = 0, w = 1).
    const std::int64_t first = std::clamp<std::int64_t>(on, 0, steps);
    for (std::int64_t k = first; k < steps; ++k) {
      s = ms_step(s, tau[i], k >= on && k < on + len ? p.i_foot_amp : 0.0, p);
      if (!(std::abs(s.u) <= 2.0)) {
        std::ostringstream ss;
        ss << "membrane voltage diverged at node " << i << " (dt = " << p.dt << " ms, t = " << (k + 1) * p.dt
           << " ms)";
        throw IntegrationError(ss.str());
      }
      if ((k + 1) % every == 0) row[(k + 1) / every] = static_cast<float>(s.u);
    }
  });
  return out;
}

void write_ctvolt(const std::filesystem::path& path, const VoltageTraces& traces) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write("CTVOLT1\n", 8);
  std::uint64_t header[2] = {traces.nodes, traces.samples};
  os.write(reinterpret_cast<const char*>(header), sizeof header);
  os.write(reinterpret_cast<const char*>(traces.u.data()), static_cast<std::streamsize>(traces.u.size() * sizeof(float)));
  if (!os) throw IoError("failed writing " + path.string());
}

VoltageTraces read_ctvolt(const std::filesystem::path& path, double sample_period) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "CTVOLT1\n", 8) != 0) throw ValidationError(path.string() + ": not a CTVOLT1 file");
  std::uint64_t header[2];
  is.read(reinterpret_cast<char*>(header), sizeof header);
  if (!is || header[0] > (1ull << 32) || header[1] > (1ull << 32)) throw ValidationError(path.string() + ": bad header");
  VoltageTraces t;
  t.nodes = header[0];
  t.samples = header[1];
  t.sample_period = sample_period;
  t.u.resize(t.nodes * t.samples);
  is.read(reinterpret_cast<char*>(t.u.data()), static_cast<std::streamsize>(t.u.size() * sizeof(float)));
  if (!is) throw ValidationError(path.string() + ": truncated trace data");
  return t;
}

}  // namespace cardiotwin::reaction
