#include "cardiotwin/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/kdtree.hpp"

namespace cardiotwin {

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double signed_volume(const Mesh& mesh, std::size_t t) {
  const auto& k = mesh.tets[t];
  return signed_volume(mesh.nodes[k[0]], mesh.nodes[k[1]], mesh.nodes[k[2]], mesh.nodes[k[3]]);
}

Vec3 centroid(const Mesh& mesh, std::size_t t) {
  const auto& k = mesh.tets[t];
  return 0.25 * (mesh.nodes[k[0]] + mesh.nodes[k[1]] + mesh.nodes[k[2]] + mesh.nodes[k[3]]);
}

std::array<Vec3, 4> basis_gradients(const Mesh& mesh, std::size_t t) {
  const auto& k = mesh.tets[t];
  const Vec3& x0 = mesh.nodes[k[0]];
  Eigen::Matrix3d J;
  J.col(0) = mesh.nodes[k[1]] - x0;
  J.col(1) = mesh.nodes[k[2]] - x0;
  J.col(2) = mesh.nodes[k[3]] - x0;
  // Rows of J^{-1} are the gradients of the barycentric coordinates 1..3.
  Eigen::Matrix3d Jinv = J.inverse();
  std::array<Vec3, 4> g;
  g[1] = Jinv.row(0).transpose();
  g[2] = Jinv.row(1).transpose();
  g[3] = Jinv.row(2).transpose();
  g[0] = -(g[1] + g[2] + g[3]);
  return g;
}

std::vector<std::array<std::uint32_t, 2>> unique_edges(const Mesh& mesh) {
  std::vector<std::array<std::uint32_t, 2>> edges;
  edges.reserve(mesh.tets.size() * 6);
  for (const auto& t : mesh.tets) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) edges.push_back({std::min(t[i], t[j]), std::max(t[i], t[j])});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

double mean_edge_length(const Mesh& mesh) {
  auto edges = unique_edges(mesh);
  if (edges.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : edges) sum += (mesh.nodes[e[0]] - mesh.nodes[e[1]]).norm();
  return sum / static_cast<double>(edges.size());
}

Csr node_to_tets(const Mesh& mesh) {
  Csr csr;
  csr.offsets.assign(mesh.nodes.size() + 1, 0);
  for (const auto& t : mesh.tets)
    for (auto v : t) ++csr.offsets[v + 1];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.items.resize(csr.offsets.back());
  std::vector<std::uint32_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (std::uint32_t t = 0; t < mesh.tets.size(); ++t)
    for (auto v : mesh.tets[t]) csr.items[fill[v]++] = t;
  return csr;
}

Csr node_neighbors(const Mesh& mesh) {
  auto edges = unique_edges(mesh);
  Csr csr;
  csr.offsets.assign(mesh.nodes.size() + 1, 0);
  for (const auto& e : edges) {
    ++csr.offsets[e[0] + 1];
    ++csr.offsets[e[1] + 1];
  }
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.items.resize(csr.offsets.back());
  std::vector<std::uint32_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& e : edges) {
    csr.items[fill[e[0]]++] = e[1];
    csr.items[fill[e[1]]++] = e[0];
  }
  return csr;
}

std::vector<BoundaryFace> boundary_faces(const Mesh& mesh) {
  // Faces opposite vertex i, ordered so that (b-a)x(c-a) points away from
  // vertex i for a positively oriented tet.
  static constexpr int kFace[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  struct Entry {
    std::array<std::uint32_t, 3> key;
    std::array<std::uint32_t, 3> face;
    std::uint32_t tet;
  };
  std::vector<Entry> entries;
  entries.reserve(mesh.tets.size() * 4);
  for (std::uint32_t t = 0; t < mesh.tets.size(); ++t) {
    const auto& k = mesh.tets[t];
    for (const auto& f : kFace) {
      std::array<std::uint32_t, 3> face{k[f[0]], k[f[1]], k[f[2]]};
      auto key = face;
      std::sort(key.begin(), key.end());
      entries.push_back({key, face, t});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.tet < b.tet;
  });
  std::vector<BoundaryFace> out;
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i + 1;
    while (j < entries.size() && entries[j].key == entries[i].key) ++j;
    if (j - i == 1) out.push_back({entries[i].face, entries[i].tet});
    i = j;
  }
  return out;
}

void validate_mesh(const Mesh& mesh) {
  const auto n = mesh.nodes.size();
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    for (auto v : mesh.tets[t]) {
      if (v >= n) {
        std::ostringstream ss;
        ss << "tet " << t << " references node " << v << " but mesh has " << n << " nodes";
        throw ValidationError(ss.str());
      }
    }
    if (!(signed_volume(mesh, t) > 0.0)) {
      std::ostringstream ss;
      ss << "tet " << t << " has non-positive signed volume " << signed_volume(mesh, t);
      throw ValidationError(ss.str());
    }
  }
  if (!mesh.surface.empty() && mesh.surface.size() != n)
    throw ValidationError("surface tag count does not match node count");
}

std::size_t orient_positive(Mesh& mesh) {
  std::size_t flipped = 0;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    if (signed_volume(mesh, t) < 0.0) {
      std::swap(mesh.tets[t][2], mesh.tets[t][3]);
      ++flipped;
    }
  }
  return flipped;
}

double lattice_spacing_for_edge(double edge_target) {
  // Per cube the Freudenthal split owns 3 axis edges, 3 face diagonals and
  // one body diagonal.
  static const double kMeanEdgeFactor = (3.0 + 3.0 * std::sqrt(2.0) + std::sqrt(3.0)) / 7.0;
  return edge_target / kMeanEdgeFactor;
}

Mesh make_box_mesh(const Vec3& lo, const Vec3& hi, double edge_target) {
  if (!(edge_target > 0.0)) throw ParameterError("edge_target must be positive");
  if (!((hi - lo).minCoeff() > 0.0)) throw ParameterError("box extents must be positive");
  const double h = lattice_spacing_for_edge(edge_target);
  std::array<int, 3> cells;
  for (int k = 0; k < 3; ++k) cells[k] = std::max(1, static_cast<int>(std::lround((hi[k] - lo[k]) / h)));

  Mesh mesh;
  mesh.edge_target = edge_target;
  const int nx = cells[0] + 1, ny = cells[1] + 1, nz = cells[2] + 1;
  mesh.nodes.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        mesh.nodes.emplace_back(lo[0] + (hi[0] - lo[0]) * i / cells[0], lo[1] + (hi[1] - lo[1]) * j / cells[1],
                                lo[2] + (hi[2] - lo[2]) * k / cells[2]);
  auto id = [&](int i, int j, int k) { return static_cast<std::uint32_t>(i + nx * (j + ny * k)); };

  static constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < cells[2]; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i)
        for (const auto& p : kPerm) {
          std::array<int, 3> c{i, j, k};
          Tet tet;
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            tet[s + 1] = id(c[0], c[1], c[2]);
          }
          mesh.tets.push_back(tet);
        }
  orient_positive(mesh);
  return mesh;
}

void compact_nodes(Mesh& mesh) {
  std::vector<std::int64_t> remap(mesh.nodes.size(), -1);
  for (const auto& t : mesh.tets)
    for (auto v : t) remap[v] = 0;
  std::vector<Vec3> nodes;
  std::vector<SurfaceTag> surface;
  for (std::size_t i = 0; i < remap.size(); ++i) {
    if (remap[i] < 0) continue;
    remap[i] = static_cast<std::int64_t>(nodes.size());
    nodes.push_back(mesh.nodes[i]);
    if (!mesh.surface.empty()) surface.push_back(mesh.surface[i]);
  }
  for (auto& t : mesh.tets)
    for (auto& v : t) v = static_cast<std::uint32_t>(remap[v]);
  mesh.nodes = std::move(nodes);
  mesh.surface = std::move(surface);
}

struct TetLocator::Impl {
  KdTree centroids;
  double search_radius = 0.0;
  std::vector<Eigen::Matrix3d> inverse_jacobians;
};

TetLocator::TetLocator(const Mesh& mesh) : mesh_(&mesh), impl_(std::make_unique<Impl>()) {
  std::vector<Vec3> c(mesh.tets.size());
  impl_->inverse_jacobians.resize(mesh.tets.size());
  double radius = 0.0;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    c[t] = centroid(mesh, t);
    const auto& k = mesh.tets[t];
    Eigen::Matrix3d J;
    for (int i = 0; i < 3; ++i) J.col(i) = mesh.nodes[k[i + 1]] - mesh.nodes[k[0]];
    impl_->inverse_jacobians[t] = J.inverse();
    for (auto v : k) radius = std::max(radius, (mesh.nodes[v] - c[t]).norm());
  }
  impl_->search_radius = radius * (1.0 + 1e-9);
  impl_->centroids = KdTree(c);
}

TetLocator::~TetLocator() = default;
TetLocator::TetLocator(TetLocator&&) noexcept = default;
TetLocator& TetLocator::operator=(TetLocator&&) noexcept = default;

std::array<double, 4> TetLocator::barycentric(std::size_t t, const Vec3& p) const {
  Vec3 l = impl_->inverse_jacobians[t] * (p - mesh_->nodes[mesh_->tets[t][0]]);
  return {1.0 - l.sum(), l[0], l[1], l[2]};
}

std::int64_t TetLocator::locate(const Vec3& p, double tol) const {
  std::vector<std::uint32_t> cand;
  impl_->centroids.radius_search(p, impl_->search_radius, cand);
  std::sort(cand.begin(), cand.end());
  for (auto t : cand) {
    auto b = barycentric(t, p);
    if (*std::min_element(b.begin(), b.end()) >= -tol) return t;
  }
  return -1;
}

double TetLocator::interpolate(std::span<const double> field, const Vec3& p) const {
  auto t = locate(p);
  if (t < 0) return std::numeric_limits<double>::quiet_NaN();
  auto b = barycentric(static_cast<std::size_t>(t), p);
  const auto& k = mesh_->tets[static_cast<std::size_t>(t)];
  return b[0] * field[k[0]] + b[1] * field[k[1]] + b[2] * field[k[2]] + b[3] * field[k[3]];
}

}  // namespace cardiotwin
