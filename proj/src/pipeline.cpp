#include "cardiotwin/pipeline.hpp"

#include <cmath>

#include "cardiotwin/aha.hpp"
#include "cardiotwin/errors.hpp"

namespace cardiotwin::pipeline {

Annotated annotate(Mesh mesh, const RunConfig& config) {
  Annotated a;
  a.coords = geometry::compute_ventricular_coordinates(mesh);
  a.fibers = geometry::assign_fibers(mesh, a.coords, config.alpha_endo, config.alpha_epi);
  a.electrodes = geometry::place_electrodes(mesh, config.electrodes);
  a.mesh = std::move(mesh);
  return a;
}

Annotated build_biventricle(const RunConfig& config) {
  return annotate(geometry::generate_idealized_biventricle(config.wall, config.edge, config.mesh_seed), config);
}

MeshFile to_file(const Annotated& a) {
  MeshFile f;
  f.mesh = a.mesh;
  const std::size_t n = a.mesh.nodes.size(), m = a.mesh.tets.size();
  f.set_node_field(kFieldTm, a.coords.tm);
  f.set_node_field(kFieldAb, a.coords.ab);
  f.set_node_field(kFieldRt, a.coords.rt);
  std::vector<double> tv(n), seg(n);
  const auto segments = aha::segments(a.coords);
  for (std::size_t i = 0; i < n; ++i) {
    tv[i] = static_cast<double>(a.coords.tv[i]);
    seg[i] = segments[i];
  }
  f.set_node_field(kFieldTv, tv);
  f.set_node_field(kFieldAha, seg);

  std::vector<double> fib(9 * m), fallback(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& fr = a.fibers.frames[t];
    for (int k = 0; k < 3; ++k) {
      fib[9 * t + k] = fr.f[k];
      fib[9 * t + 3 + k] = fr.s[k];
      fib[9 * t + 6 + k] = fr.n[k];
    }
    fallback[t] = a.fibers.fallback[t];
  }
  f.set_elem_field(kFieldFibers, fib, 9);
  f.set_elem_field(kFieldFiberFallback, fallback);

  std::vector<double> el;
  for (const auto& p : a.electrodes.positions) el.insert(el.end(), p.data(), p.data() + 3);
  f.set_global(kFieldElectrodes, el);
  return f;
}

Annotated from_file(const MeshFile& file, const RunConfig& config) {
  validate_mesh(file.mesh);
  const bool has_coords = file.has(kFieldTm) && file.has(kFieldAb) && file.has(kFieldRt) && file.has(kFieldTv);
  if (!has_coords || !file.has(kFieldFibers) || !file.has(kFieldElectrodes)) return annotate(file.mesh, config);

  Annotated a;
  a.mesh = file.mesh;
  const std::size_t n = a.mesh.nodes.size(), m = a.mesh.tets.size();
  a.coords.tm = file.node_field(kFieldTm);
  a.coords.ab = file.node_field(kFieldAb);
  a.coords.rt = file.node_field(kFieldRt);
  const auto& tv = file.node_field(kFieldTv);
  a.coords.tv.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.coords.tv[i] = tv[i] >= 0.5 ? geometry::Ventricle::rv : geometry::Ventricle::lv;

  const auto& fib = file.elem_field(kFieldFibers, 9);
  a.fibers.frames.resize(m);
  a.fibers.fallback.assign(m, 0);
  for (std::size_t t = 0; t < m; ++t) {
    auto& fr = a.fibers.frames[t];
    fr.f = Vec3(fib[9 * t], fib[9 * t + 1], fib[9 * t + 2]);
    fr.s = Vec3(fib[9 * t + 3], fib[9 * t + 4], fib[9 * t + 5]);
    fr.n = Vec3(fib[9 * t + 6], fib[9 * t + 7], fib[9 * t + 8]);
  }
  if (file.has(kFieldFiberFallback)) {
    const auto& fb = file.elem_field(kFieldFiberFallback);
    for (std::size_t t = 0; t < m; ++t) a.fibers.fallback[t] = fb[t] != 0.0;
  }
  const auto& el = file.fields.at(kFieldElectrodes).data;
  if (el.size() != 3 * geometry::kElectrodeCount) throw ValidationError("electrode field must hold 27 values");
  for (std::size_t e = 0; e < geometry::kElectrodeCount; ++e)
    a.electrodes.positions[e] = Vec3(el[3 * e], el[3 * e + 1], el[3 * e + 2]);
  return a;
}

void store_tissue(MeshFile& file, const infarct::TissueMap& tissue) {
  std::vector<double> v(tissue.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(tissue.labels[i]);
  file.set_node_field(kFieldTissue, v);
}

infarct::TissueMap load_tissue(const MeshFile& file) {
  const std::size_t n = file.mesh.nodes.size();
  if (!file.has(kFieldTissue)) return infarct::TissueMap::healthy(n);
  const auto& v = file.node_field(kFieldTissue);
  infarct::TissueMap map = infarct::TissueMap::healthy(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(v[i] == 0.0 || v[i] == 1.0 || v[i] == 2.0)) throw ValidationError("tissue labels must be 0, 1 or 2");
    map.labels[i] = static_cast<infarct::Tissue>(static_cast<int>(v[i]));
  }
  return map;
}

void store_activation(MeshFile& file, const activation::ActivationMap& map, const activation::RootSet& roots) {
  file.set_node_field(kFieldActivation, map.t_ms);
  std::vector<double> r;
  for (const auto& root : roots) {
    r.push_back(root.node);
    r.push_back(root.t_ms);
  }
  file.set_global(kFieldRoots, r);
}

activation::ActivationMap load_activation(const MeshFile& file) {
  activation::ActivationMap map;
  map.t_ms = file.node_field(kFieldActivation);
  for (double t : map.t_ms) map.unreached += std::isfinite(t) ? 0 : 1;
  return map;
}

}  // namespace cardiotwin::pipeline
