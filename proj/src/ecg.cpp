#include "cardiotwin/ecg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"

namespace cardiotwin::ecg {

using geometry::Electrode;
using geometry::kElectrodeCount;

LeadField lead_field(const Mesh& mesh, const geometry::ElectrodeSet& electrodes) {
  const std::size_t n = mesh.nodes.size();
  const TetLocator locator(mesh);
  for (std::size_t e = 0; e < kElectrodeCount; ++e)
    if (locator.locate(electrodes.positions[e]) >= 0) {
      std::ostringstream ss;
      ss << "electrode " << geometry::kElectrodeNames[e] << " lies inside the mesh";
      throw PlacementError(ss.str());
    }

  LeadField field;
  for (auto& w : field.weights) w.assign(n, 0.0);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const auto g = basis_gradients(mesh, t);
    const double vol = signed_volume(mesh, t);
    const Vec3 c = centroid(mesh, t);
    const auto& k = mesh.tets[t];
    for (std::size_t e = 0; e < kElectrodeCount; ++e) {
      const Vec3 r = electrodes.positions[e] - c;
      const double len = r.norm();
      if (!(len > 1e-9)) throw PlacementError("electrode coincides with an element centroid");
      const Vec3 grad_inv_r = r / (len * len * len);
      for (int a = 0; a < 4; ++a) field.weights[e][k[a]] -= vol * g[a].dot(grad_inv_r);
    }
  }
  return field;
}

Potentials electrode_potentials(const LeadField& field, const reaction::VoltageTraces& traces) {
  const std::size_t n = traces.nodes, m = traces.samples;
  for (const auto& w : field.weights)
    if (w.size() != n) throw ValidationError("lead field and voltage traces cover different node sets");
  Potentials out;
  out.sample_period = traces.sample_period;
  for (std::size_t e = 0; e < kElectrodeCount; ++e) {
    auto& phi = out.phi[e];
    phi.assign(m, 0.0);
    const auto& w = field.weights[e];
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w[i];
      const float* u = traces.u.data() + i * m;
      for (std::size_t k = 0; k < m; ++k) phi[k] += wi * static_cast<double>(u[k]);
    }
  }
  return out;
}

Potentials electrode_potentials(const Mesh& mesh, const reaction::VoltageTraces& traces,
                                const geometry::ElectrodeSet& electrodes) {
  return electrode_potentials(lead_field(mesh, electrodes), traces);
}

EcgRecord derive_leads(const Potentials& p) {
  const std::size_t m = p.phi[0].size();
  for (std::size_t e = 0; e < kElectrodeCount; ++e)
    if (p.phi[e].empty() || p.phi[e].size() != m) {
      std::ostringstream ss;
      ss << "electrode series " << geometry::kElectrodeNames[e] << " is missing or has the wrong length";
      throw ValidationError(ss.str());
    }
  const auto& ra = p.phi[static_cast<std::size_t>(Electrode::RA)];
  const auto& la = p.phi[static_cast<std::size_t>(Electrode::LA)];
  const auto& ll = p.phi[static_cast<std::size_t>(Electrode::LL)];
  EcgRecord r;
  r.sample_period = p.sample_period;
  for (auto& lead : r.leads) lead.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double wct = (ra[k] + la[k] + ll[k]) / 3.0;
    r.leads[0][k] = la[k] - ra[k];
    r.leads[1][k] = ll[k] - ra[k];
    for (std::size_t v = 0; v < 6; ++v) r.leads[2 + v][k] = p.phi[3 + v][k] - wct;
  }
  return r;
}

EcgRecord normalize_and_resample(const EcgRecord& record, std::size_t t_out) {
  const std::size_t n = record.samples();
  if (n == 0) throw ValidationError("cannot resample an empty record");
  if (t_out < 2) throw ParameterError("resampling needs at least two output samples");
  for (const auto& lead : record.leads)
    if (lead.size() != n) throw ValidationError("record leads differ in length");

  EcgRecord out = record;
  const double span = static_cast<double>(n - 1) * record.sample_period;
  out.sample_period = span / static_cast<double>(t_out - 1);
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    const auto& src = record.leads[l];
    auto& dst = out.leads[l];
    dst.assign(t_out, 0.0);
    for (std::size_t k = 0; k < t_out; ++k) {
      if (n == 1) {
        dst[k] = src[0];
        continue;
      }
      const double x = static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(t_out - 1);
      const auto i = std::min(static_cast<std::size_t>(x), n - 2);
      const double f = x - static_cast<double>(i);
      dst[k] = src[i] + f * (src[i + 1] - src[i]);
    }
  }

  double peak = 0.0;
  for (const auto& lead : out.leads)
    for (double v : lead) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (auto& lead : out.leads)
      for (double& v : lead) v /= peak;
    out.normalized = true;
    out.scale = record.scale * peak;
  } else {
    out.normalized = false;
    log::warn("record is identically zero; amplitude normalization skipped");
  }
  return out;
}

}  // namespace cardiotwin::ecg
