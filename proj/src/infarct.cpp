#include "cardiotwin/infarct.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cardiotwin/aha.hpp"
#include "cardiotwin/errors.hpp"
#include "cardiotwin/kdtree.hpp"
#include "cardiotwin/log.hpp"
#include "cardiotwin/parallel.hpp"
#include "cardiotwin/random.hpp"

namespace cardiotwin::infarct {

std::size_t TissueMap::count(Tissue t) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), t));
}

void ScarParams::validate() const {
  if (!(sigma > 0.0)) throw ParameterError("scar: sigma must be positive");
  if (!(bz_radius >= 0.0)) throw ParameterError("scar: bz_radius must be non-negative");
  if (!(lambda >= 0.0)) throw ParameterError("scar: lambda must be non-negative");
  if (!std::isfinite(tau_base)) throw ParameterError("scar: tau_base must be finite");
  if (region.empty()) throw ParameterError("scar: region must name at least one AHA segment");
  for (int s : region)
    if (s < 1 || s > aha::kSegmentCount) throw ParameterError("scar: region segment outside 1..17");
}

std::string_view location_name(Location l) {
  switch (l) {
    case Location::septal: return "septal";
    case Location::apical: return "apical";
    case Location::ext_anterior: return "ext_anterior";
    case Location::lim_anterior: return "lim_anterior";
    case Location::lateral_large: return "lateral_large";
    case Location::lateral_small: return "lateral_small";
    case Location::inferior: return "inferior";
    case Location::inferolateral: return "inferolateral";
  }
  return "?";
}

std::string_view transmurality_name(Transmurality t) {
  switch (t) {
    case Transmurality::none: return "none";
    case Transmurality::subendocardial: return "subendocardial";
    case Transmurality::transmural: return "transmural";
  }
  return "?";
}

namespace {

struct LocationRow {
  Location location;
  std::vector<int> region;
  double tau_base;
};

// Larger regions get a slightly higher threshold so scar burden stays in a
// comparable range; lateral_small shrinks both the region and the burden.
const std::vector<LocationRow>& location_table() {
  static const std::vector<LocationRow> rows = {
      {Location::septal, {2, 3, 8, 9, 14}, 0.50},
      {Location::apical, {13, 14, 15, 16, 17}, 0.50},
      {Location::ext_anterior, {1, 2, 7, 8, 13, 14}, 0.55},
      {Location::lim_anterior, {1, 7, 13}, 0.45},
      {Location::lateral_large, {5, 6, 11, 12, 16}, 0.50},
      {Location::lateral_small, {12, 16}, 0.60},
      {Location::inferior, {4, 10, 15}, 0.45},
      {Location::inferolateral, {4, 5, 10, 11, 15, 16}, 0.55},
  };
  return rows;
}

}  // namespace

std::vector<Scenario> scenario_catalog() {
  std::vector<Scenario> out;
  out.reserve(2 * kLocationCount + 1);
  for (const auto& row : location_table()) {
    for (auto tr : {Transmurality::subendocardial, Transmurality::transmural}) {
      Scenario s;
      s.name = std::string(transmurality_name(tr)) + "_" + std::string(location_name(row.location));
      s.location = row.location;
      s.transmurality = tr;
      s.params.tau_base = row.tau_base;
      s.params.lambda = tr == Transmurality::transmural ? kLambdaTransmural : kLambdaSubendocardial;
      s.params.sigma = kDefaultSigma;
      s.params.bz_radius = kDefaultBzRadius;
      s.params.region = row.region;
      out.push_back(std::move(s));
    }
  }
  Scenario h;
  h.name = "healthy";
  h.healthy = true;
  h.params.sigma = kDefaultSigma;
  h.params.bz_radius = kDefaultBzRadius;
  out.push_back(std::move(h));
  return out;
}

Scenario find_scenario(std::string_view name) {
  for (auto& s : scenario_catalog())
    if (s.name == name) return s;
  throw ValidationError("unknown scenario '" + std::string(name) + "'");
}

std::vector<double> correlated_noise_field(const Mesh& mesh, double sigma, std::uint64_t seed, unsigned jobs) {
  if (!(sigma > 0.0)) throw ParameterError("noise: sigma must be positive");
  const std::size_t n = mesh.nodes.size();
  Rng rng(derive_seed(seed, 0x6e6f697365));
  std::vector<double> raw(n);
  for (auto& u : raw) u = rng.uniform();

  const KdTree tree(mesh.nodes);
  const double radius = 3.0 * sigma;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> smooth(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    thread_local std::vector<std::uint32_t> nb;
    nb.clear();
    tree.radius_search(mesh.nodes[i], radius, nb);
    double num = 0.0, den = 0.0;
    for (auto j : nb) {
      double w = std::exp(-(mesh.nodes[j] - mesh.nodes[i]).squaredNorm() * inv);
      num += w * raw[j];
      den += w;
    }
    smooth[i] = num / den;
  });

  auto [lo, hi] = std::minmax_element(smooth.begin(), smooth.end());
  const double a = *lo, b = *hi;
  for (auto& v : smooth) v = b > a ? (v - a) / (b - a) : 0.5;
  return smooth;
}

TissueMap synthesize_scar(std::span<const double> noise, const geometry::VentricularCoords& coords,
                          const ScarParams& params) {
  params.validate();
  const std::size_t n = coords.size();
  if (noise.size() != n) throw ValidationError("noise field and coordinates cover different node sets");
  bool in_region[aha::kSegmentCount + 1] = {};
  for (int s : params.region) in_region[s] = true;

  const auto seg = aha::segments(coords);
  TissueMap map = TissueMap::healthy(n);
  std::size_t scar = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_region[seg[i]]) continue;
    if (noise[i] > params.tau_base + params.lambda * (1.0 - coords.tm[i])) {
      map.labels[i] = Tissue::scar;
      ++scar;
    }
  }
  if (scar == 0) {
    map.degenerate = true;
    log::warn("scar thresholding selected no node; scenario is degenerate");
  }
  return map;
}

TissueMap grow_border_zone(const Mesh& mesh, const TissueMap& scar, double bz_radius) {
  if (!(bz_radius >= 0.0)) throw ParameterError("border zone radius must be non-negative");
  if (scar.size() != mesh.nodes.size()) throw ValidationError("tissue map and mesh sizes differ");
  TissueMap out = scar;
  std::vector<Vec3> pts;
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < scar.size(); ++i)
    if (scar.labels[i] == Tissue::scar) {
      pts.push_back(mesh.nodes[i]);
      ids.push_back(static_cast<std::uint32_t>(i));
    }
  if (pts.empty() || bz_radius == 0.0) return out;
  const KdTree tree(pts, ids);
  for (std::size_t i = 0; i < scar.size(); ++i)
    if (out.labels[i] == Tissue::normal && tree.any_within(mesh.nodes[i], bz_radius)) out.labels[i] = Tissue::bz;
  return out;
}

}  // namespace cardiotwin::infarct
