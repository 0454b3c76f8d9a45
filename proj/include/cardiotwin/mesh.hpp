#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cardiotwin {

using Vec3 = Eigen::Vector3d;
using Tet = std::array<std::uint32_t, 4>;

/// Boundary classification of a mesh node. Interior nodes are `none`.
enum class SurfaceTag : std::uint8_t { none = 0, lv_endo = 1, rv_endo = 2, epi = 3, base = 4 };

inline bool is_endocardial(SurfaceTag t) {
  return t == SurfaceTag::lv_endo || t == SurfaceTag::rv_endo;
}

/// Long-axis frame used by the analytic apicobasal and rotational
/// coordinates. `axis` points from apex to base; `rt_zero` is the direction
/// of the anterior LV/RV junction and `rt_quarter` the direction a quarter
/// turn further (towards the septum).
struct HeartFrame {
  Vec3 base_center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  Vec3 rt_zero = Vec3::UnitX();
  Vec3 rt_quarter = -Vec3::UnitY();
};

/// Tetrahedral mesh. Positions in cm; every tet is positively oriented.
struct Mesh {
  std::vector<Vec3> nodes;
  std::vector<Tet> tets;
  double edge_target = 0.0;

  /// Optional annotations produced by the biventricle generator (empty
  /// `surface` means unannotated).
  std::vector<SurfaceTag> surface;
  HeartFrame frame;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t tet_count() const { return tets.size(); }
};

/// Compressed sparse row adjacency (offsets has size()+1 entries).
struct Csr {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> items;

  std::span<const std::uint32_t> operator[](std::size_t i) const {
    return {items.data() + offsets[i], items.data() + offsets[i + 1]};
  }
  std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

struct BoundaryFace {
  std::array<std::uint32_t, 3> nodes;  // ordered so the normal points outward
  std::uint32_t tet;
};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
double signed_volume(const Mesh& mesh, std::size_t tet);
Vec3 centroid(const Mesh& mesh, std::size_t tet);

/// Gradients of the four linear basis functions of a tet (constant per tet).
std::array<Vec3, 4> basis_gradients(const Mesh& mesh, std::size_t tet);

std::vector<std::array<std::uint32_t, 2>> unique_edges(const Mesh& mesh);
double mean_edge_length(const Mesh& mesh);

Csr node_to_tets(const Mesh& mesh);
Csr node_neighbors(const Mesh& mesh);
std::vector<BoundaryFace> boundary_faces(const Mesh& mesh);

/// Throws ValidationError on out-of-range indices or non-positive volumes.
void validate_mesh(const Mesh& mesh);

/// Flips tets with negative signed volume; returns the number flipped.
std::size_t orient_positive(Mesh& mesh);

/// Freudenthal (6 tets per cube) lattice spacing whose mean edge length
/// equals `edge_target`.
double lattice_spacing_for_edge(double edge_target);

/// Axis-aligned box meshed with the Freudenthal lattice; the cell count per
/// axis is rounded so the box extents are matched exactly.
Mesh make_box_mesh(const Vec3& lo, const Vec3& hi, double edge_target);

/// Removes unreferenced nodes, remapping tets and per-node annotations.
void compact_nodes(Mesh& mesh);

/// Point location over a fixed mesh.
class TetLocator {
 public:
  explicit TetLocator(const Mesh& mesh);
  ~TetLocator();
  TetLocator(TetLocator&&) noexcept;
  TetLocator& operator=(TetLocator&&) noexcept;

  /// Index of a tet containing p (barycentric tolerance `tol`), or -1.
  std::int64_t locate(const Vec3& p, double tol = 1e-9) const;

  /// Barycentric coordinates of p with respect to tet t.
  std::array<double, 4> barycentric(std::size_t t, const Vec3& p) const;

  /// Linear interpolation of a nodal field at p; NaN outside the mesh.
  double interpolate(std::span<const double> field, const Vec3& p) const;

 private:
  struct Impl;
  const Mesh* mesh_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cardiotwin
