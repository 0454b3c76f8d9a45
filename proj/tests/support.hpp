#pragma once

// Shared fixtures and independent oracles. The oracles deliberately avoid
// the library's own spatial index, local solver and DP so they can catch
// errors in them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cardiotwin/activation.hpp"
#include "cardiotwin/cohort.hpp"
#include "cardiotwin/config.hpp"
#include "cardiotwin/infarct.hpp"
#include "cardiotwin/mesh.hpp"
#include "cardiotwin/pipeline.hpp"
#include "cardiotwin/random.hpp"

namespace testing {

using namespace cardiotwin;

/// Coarse biventricle (edge 0.25 cm, about 12k nodes) shared by tests.
inline const pipeline::Annotated& coarse_heart() {
  static const pipeline::Annotated heart = [] {
    RunConfig c;
    c.edge = 0.25;
    return pipeline::build_biventricle(c);
  }();
  return heart;
}

inline RunConfig coarse_config() {
  RunConfig c;
  c.edge = 0.25;
  return c;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cardiotwin_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Reduced-size configuration for cohort runs inside unit tests.
inline RunConfig tiny_cohort_config() {
  RunConfig c = coarse_config();
  c.sample_nodes = 256;
  c.ecg_samples = 256;
  c.reaction.t_end = 450.0;
  return c;
}

/// One-mesh cohort on the coarse heart, generated once per test binary.
inline const std::filesystem::path& tiny_cohort() {
  static const std::filesystem::path dir = [] {
    auto d = scratch_dir("tiny_cohort");
    const std::vector<std::pair<std::string, pipeline::Annotated>> meshes{{"m000", coarse_heart()}};
    const auto report = cohort::generate_cohort(meshes, d, 11, tiny_cohort_config(), 1);
    if (report.failures != 0) throw std::runtime_error("tiny cohort had failures");
    return d;
  }();
  return dir;
}

/// Box lattice with exactly nx * ny * nz nodes.
inline Mesh box_with_nodes(int nx, int ny, int nz, double edge) {
  const double h = lattice_spacing_for_edge(edge);
  return make_box_mesh(Vec3::Zero(), Vec3((nx - 1) * h, (ny - 1) * h, (nz - 1) * h), edge);
}

/// All-pairs border-zone labels.
inline infarct::TissueMap brute_force_bz(const Mesh& mesh, const infarct::TissueMap& scar, double r) {
  infarct::TissueMap out = scar;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    if (scar.labels[i] != infarct::Tissue::normal) continue;
    for (std::size_t j = 0; j < mesh.nodes.size(); ++j) {
      if (scar.labels[j] != infarct::Tissue::scar) continue;
      const Vec3 d = mesh.nodes[i] - mesh.nodes[j];
      if (std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z()) <= r) {
        out.labels[i] = infarct::Tissue::bz;
        break;
      }
    }
  }
  return out;
}

/// Shortest paths along mesh edges, each edge costing its travel time in the
/// fastest incident element metric (ms). Paths restricted to edges can only
/// be slower than the continuous solution.
inline std::vector<double> dijkstra_edges(const Mesh& mesh, const std::vector<activation::Tensor>& tensors,
                                          const activation::RootSet& roots) {
  const std::size_t n = mesh.nodes.size();
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const Eigen::Matrix3d inv = tensors[t].inverse();
    const auto& tet = mesh.tets[t];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        if (a == b) continue;
        const Vec3 e = mesh.nodes[tet[b]] - mesh.nodes[tet[a]];
        const double w = 1000.0 * std::sqrt(e.dot(inv * e));
        adj[tet[a]].emplace_back(tet[b], w);
      }
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (const auto& r : roots) {
    dist[r.node] = std::min(dist[r.node], r.t_ms);
    pq.emplace(dist[r.node], r.node);
  }
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (auto [v, w] : adj[u])
      if (d + w < dist[v]) {
        dist[v] = d + w;
        pq.emplace(dist[v], v);
      }
  }
  return dist;
}

/// DTW by enumerating every monotone alignment path (exponential; tiny
/// inputs only).
inline double dtw_enumerate(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

/// Two tets sharing the face (1, 2, 3) and straddling the x = 0 plane.
inline Mesh two_tet_fixture() {
  Mesh m;
  m.nodes = {Vec3(-1, 0, 0), Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 0, 0)};
  m.tets = {Tet{0, 1, 2, 3}, Tet{4, 1, 3, 2}};
  orient_positive(m);
  m.edge_target = 1.0;
  return m;
}

/// Pseudo-ECG potential written out element by element from the formula
/// phi = -sum vol grad(U) . grad(1/r), grad(1/r) = (e - c) / |e - c|^3.
inline double dipole_potential(const Mesh& m, const std::vector<double>& u, const Vec3& e) {
  double phi = 0.0;
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto& tet = m.tets[t];
    const Vec3 &p0 = m.nodes[tet[0]], &p1 = m.nodes[tet[1]], &p2 = m.nodes[tet[2]], &p3 = m.nodes[tet[3]];
    Eigen::Matrix3d J;
    J.row(0) = p1 - p0;
    J.row(1) = p2 - p0;
    J.row(2) = p3 - p0;
    const Vec3 du(u[tet[1]] - u[tet[0]], u[tet[2]] - u[tet[0]], u[tet[3]] - u[tet[0]]);
    const Vec3 grad_u = J.inverse() * du;
    const double vol = std::abs(J.determinant()) / 6.0;
    const Vec3 c = (p0 + p1 + p2 + p3) / 4.0;
    const Vec3 r = e - c;
    phi -= vol * grad_u.dot(r / std::pow(r.norm(), 3));
  }
  return phi;
}

}  // namespace testing
