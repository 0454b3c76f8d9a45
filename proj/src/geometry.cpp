#include "cardiotwin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"
#include "cardiotwin/random.hpp"

namespace cardiotwin::geometry {
namespace {

struct Ellipsoid {
  Vec3 center;
  Vec3 radii;

  double value(const Vec3& p) const { return ((p - center).cwiseQuotient(radii)).squaredNorm() - 1.0; }
  bool contains(const Vec3& p) const { return value(p) < 0.0; }
  Vec3 gradient(const Vec3& p) const { return 2.0 * (p - center).cwiseQuotient(radii.cwiseProduct(radii)); }

  /// Newton projection onto the surface. With `keep_z` the point moves in its
  /// horizontal plane only (valid because all centres lie on z = 0).
  Vec3 project(Vec3 p, bool keep_z) const {
    for (int it = 0; it < 30; ++it) {
      double f = value(p);
      Vec3 g = gradient(p);
      if (keep_z) g.z() = 0.0;
      double g2 = g.squaredNorm();
      if (g2 < 1e-300) break;
      Vec3 step = f * g / g2;
      p -= step;
      if (step.norm() < 1e-13) break;
    }
    return p;
  }
};

struct Biventricle {
  Ellipsoid lv_endo, lv_epi, rv_endo, rv_epi;

  explicit Biventricle(const WallParams& w) {
    lv_endo = {Vec3::Zero(), Vec3(w.lv_endo_radius, w.lv_endo_radius, w.lv_endo_half_length)};
    lv_epi = {Vec3::Zero(), lv_endo.radii + Vec3::Constant(w.lv_wall)};
    rv_endo = {Vec3(0.0, -w.rv_offset, 0.0),
               Vec3(w.rv_endo_radius_x, w.rv_endo_radius_y, w.rv_endo_half_length)};
    rv_epi = {rv_endo.center, rv_endo.radii + Vec3::Constant(w.rv_wall)};
  }

  bool in_lv_wall(const Vec3& p) const { return lv_epi.contains(p) && !lv_endo.contains(p); }
  bool in_rv_wall(const Vec3& p) const {
    return rv_epi.contains(p) && !rv_endo.contains(p) && !lv_epi.contains(p);
  }
  bool in_myocardium(const Vec3& p) const { return p.z() < 0.0 && (in_lv_wall(p) || in_rv_wall(p)); }
  bool in_rv_cavity(const Vec3& p) const { return rv_endo.contains(p) && !lv_epi.contains(p); }

  /// Region on the far side of a boundary face (offset point just outside).
  SurfaceTag classify_exterior(const Vec3& p) const {
    if (p.z() >= 0.0) return SurfaceTag::base;
    if (lv_endo.contains(p)) return SurfaceTag::lv_endo;
    if (in_rv_cavity(p)) return SurfaceTag::rv_endo;
    return SurfaceTag::epi;
  }

  /// Closest admissible point on the surface carrying `tag`. The RV cavity
  /// and the epicardium are each bounded by two ellipsoid patches; the
  /// candidate that lies on its patch and moves least wins.
  Vec3 snap_target(const Vec3& p, SurfaceTag tag, bool keep_z) const {
    auto pick = [&](const Ellipsoid& a, auto on_a, const Ellipsoid& b, auto on_b) {
      Vec3 pa = a.project(p, keep_z), pb = b.project(p, keep_z);
      bool va = on_a(pa), vb = on_b(pb);
      if (va != vb) return va ? pa : pb;
      return (pa - p).squaredNorm() <= (pb - p).squaredNorm() ? pa : pb;
    };
    constexpr double tol = 1e-9;
    switch (tag) {
      case SurfaceTag::lv_endo: return lv_endo.project(p, keep_z);
      case SurfaceTag::rv_endo:
        return pick(rv_endo, [&](const Vec3& q) { return lv_epi.value(q) >= -tol; }, lv_epi,
                    [&](const Vec3& q) { return rv_endo.value(q) <= tol; });
      case SurfaceTag::epi:
        return pick(lv_epi, [&](const Vec3& q) { return rv_epi.value(q) >= -tol; }, rv_epi,
                    [&](const Vec3& q) { return lv_epi.value(q) >= -tol; });
      default: return p;
    }
  }
};

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

/// Angle (radians, atan2(y, x)) of the anterior LV/RV junction at mid height:
/// walking from the septum centre (-y) towards anterior (+x) along the LV
/// epicardium, the first point no longer covered by the RV free wall.
double anterior_junction_angle(const Biventricle& bv) {
  const double z = -0.5 * bv.lv_epi.radii.z();
  const double scale = std::sqrt(1.0 - 0.25);
  const double r = bv.lv_epi.radii.x() * scale;
  const double start = -std::numbers::pi / 2.0;
  auto covered = [&](double theta) {
    Vec3 p(r * std::cos(theta), r * std::sin(theta), z);
    return bv.rv_epi.contains(p);
  };
  if (!covered(start)) throw ParameterError("RV does not wrap the septum at mid height");
  double lo = start, hi = start + std::numbers::pi;
  if (covered(hi)) throw ParameterError("RV wraps the whole LV at mid height");
  // Coarse scan then bisection keeps the result independent of step size.
  const int steps = 720;
  for (int i = 1; i <= steps; ++i) {
    double th = start + std::numbers::pi * i / steps;
    if (!covered(th)) {
      hi = th;
      lo = start + std::numbers::pi * (i - 1) / steps;
      break;
    }
  }
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (covered(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

using SparseMatrix = Eigen::SparseMatrix<double>;

SparseMatrix stiffness_matrix(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.tets.size() * 16);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    auto g = basis_gradients(mesh, t);
    double vol = signed_volume(mesh, t);
    const auto& k = mesh.tets[t];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) trip.emplace_back(k[i], k[j], vol * g[i].dot(g[j]));
  }
  SparseMatrix K(static_cast<Eigen::Index>(mesh.nodes.size()), static_cast<Eigen::Index>(mesh.nodes.size()));
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

/// Solves the Laplace equation with Dirichlet values where `fixed` is
/// non-NaN; the remaining boundary is insulated.
std::vector<double> solve_laplace(const SparseMatrix& K, const std::vector<double>& fixed) {
  const auto n = fixed.size();
  std::vector<std::int64_t> free_index(n, -1);
  std::int64_t nfree = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(fixed[i])) free_index[i] = nfree++;

  std::vector<double> out(fixed);
  if (nfree == 0) return out;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  for (int col = 0; col < K.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
      auto r = free_index[static_cast<std::size_t>(it.row())];
      if (r < 0) continue;
      auto c = free_index[static_cast<std::size_t>(col)];
      if (c >= 0)
        trip.emplace_back(r, c, it.value());
      else
        rhs[r] -= it.value() * fixed[static_cast<std::size_t>(col)];
    }
  }
  SparseMatrix A(nfree, nfree);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
  cg.setTolerance(1e-11);
  cg.setMaxIterations(20000);
  cg.compute(A);
  if (cg.info() != Eigen::Success) throw TopologyError("Laplace system factorization failed");
  Eigen::VectorXd x = cg.solve(rhs);
  if (cg.info() != Eigen::Success) throw TopologyError("Laplace solve did not converge");
  for (std::size_t i = 0; i < n; ++i)
    if (free_index[i] >= 0) out[i] = std::clamp(x[free_index[i]], 0.0, 1.0);
  return out;
}

}  // namespace

void WallParams::validate(double edge_target) const {
  auto fail = [](const std::string& msg) { throw ParameterError("wall parameters: " + msg); };
  if (!(edge_target > 0.0)) fail("edge_target must be positive");
  for (double r : {lv_endo_radius, lv_endo_half_length, rv_endo_radius_x, rv_endo_radius_y, rv_endo_half_length})
    if (!(r > 0.0)) fail("all radii must be positive");
  if (!(lv_wall > 0.0) || !(rv_wall > 0.0)) fail("wall thickness must be positive");
  if (lv_wall >= lv_endo_radius) fail("LV wall thickness must be smaller than the LV cavity radius");
  if (rv_wall >= std::min({rv_endo_radius_x, rv_endo_radius_y, rv_endo_half_length}))
    fail("RV wall thickness must be smaller than the RV cavity radii");
  if (!(lv_wall > 2.0 * edge_target)) fail("LV wall must be thicker than two edge lengths");
  if (!(rv_offset > 0.0)) fail("rv_offset must be positive");
  if (!(rv_offset + rv_endo_radius_y > lv_endo_radius + lv_wall + 2.0 * edge_target))
    fail("RV cavity does not clear the LV epicardium");
  if (rv_endo_radius_y - rv_offset <= -(lv_endo_radius + lv_wall))
    fail("RV cavity does not reach the LV epicardium");
}

Mesh generate_idealized_biventricle(const WallParams& params, double edge_target, std::uint64_t seed) {
  params.validate(edge_target);
  const Biventricle bv(params);
  const double h = lattice_spacing_for_edge(edge_target);

  Vec3 lo(-std::max(bv.lv_epi.radii.x(), bv.rv_epi.radii.x()),
          std::min(-bv.lv_epi.radii.y(), bv.rv_epi.center.y() - bv.rv_epi.radii.y()),
          -std::max(bv.lv_epi.radii.z(), bv.rv_epi.radii.z()));
  Vec3 hi(-lo.x(), std::max(bv.lv_epi.radii.y(), bv.rv_epi.center.y() + bv.rv_epi.radii.y()), 0.0);

  Rng rng(derive_seed(seed, 0x6d657368));
  Vec3 shift(rng.uniform(), rng.uniform(), rng.uniform());
  // Two spare layers on each side keep every myocardial tet off the lattice
  // boundary whatever the shift.
  const Vec3 origin = lo - Vec3::Constant(2.0 * h) + h * shift;
  std::array<int, 3> cells;
  for (int k = 0; k < 3; ++k) cells[k] = static_cast<int>(std::ceil((hi[k] + 2.0 * h - origin[k]) / h));
  const int nx = cells[0] + 1, ny = cells[1] + 1, nz = cells[2] + 1;

  const std::size_t lattice_nodes = static_cast<std::size_t>(nx) * ny * nz;
  if (lattice_nodes >= (std::size_t{1} << 21)) throw ParameterError("edge_target too small for the mesh generator");
  auto lattice_index = [&](const std::array<int, 3>& v) {
    return static_cast<std::uint32_t>(v[0] + nx * (v[1] + ny * v[2]));
  };
  auto lattice_pos = [&](std::uint32_t id) {
    int i = static_cast<int>(id % nx), j = static_cast<int>((id / nx) % ny), k = static_cast<int>(id / nx / ny);
    return Vec3(origin + h * Vec3(i, j, k));
  };
  auto face_key = [](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    return (std::uint64_t{a} << 42) | (std::uint64_t{b} << 21) | c;
  };
  static constexpr int kFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

  // Every lattice tet, in cell-major order, with the region of its centroid.
  static constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<Tet> lattice_tets;
  std::vector<std::uint8_t> inside;
  lattice_tets.reserve(static_cast<std::size_t>(cells[0]) * cells[1] * cells[2] * 6);
  for (int k = 0; k < cells[2]; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i)
        for (const auto& p : kPerm) {
          std::array<std::array<int, 3>, 4> c;
          c[0] = {i, j, k};
          for (int s = 0; s < 3; ++s) {
            c[s + 1] = c[s];
            ++c[s + 1][p[s]];
          }
          Tet t{lattice_index(c[0]), lattice_index(c[1]), lattice_index(c[2]), lattice_index(c[3])};
          Vec3 centre = 0.25 * (lattice_pos(t[0]) + lattice_pos(t[1]) + lattice_pos(t[2]) + lattice_pos(t[3]));
          lattice_tets.push_back(t);
          inside.push_back(bv.in_myocardium(centre) ? 1 : 0);
        }

  // Largest face-or-vertex connected piece of myocardium.
  {
    UnionFind uf(lattice_nodes);
    for (std::size_t t = 0; t < lattice_tets.size(); ++t)
      if (inside[t])
        for (int i = 1; i < 4; ++i) uf.unite(lattice_tets[t][0], lattice_tets[t][i]);
    std::vector<std::size_t> count(lattice_nodes, 0);
    for (std::size_t t = 0; t < lattice_tets.size(); ++t)
      if (inside[t]) ++count[uf.find(lattice_tets[t][0])];
    auto best = static_cast<std::uint32_t>(std::max_element(count.begin(), count.end()) - count.begin());
    if (count[best] == 0) throw ParameterError("wall parameters produce an empty mesh");
    std::size_t dropped = 0;
    for (std::size_t t = 0; t < lattice_tets.size(); ++t)
      if (inside[t] && uf.find(lattice_tets[t][0]) != best) {
        inside[t] = 0;
        ++dropped;
      }
    if (dropped > 0) {
      std::ostringstream ss;
      ss << "dropped " << dropped << " tets outside the main component";
      log::info(ss.str());
    }
  }

  // A boundary face is tagged by the region of the excluded lattice tet
  // across it. Excluded myocardium (dropped islands) counts as epicardium.
  std::unordered_map<std::uint64_t, std::uint8_t> face_region;
  for (std::size_t t = 0; t < lattice_tets.size(); ++t) {
    if (!inside[t]) continue;
    const auto& v = lattice_tets[t];
    for (const auto& f : kFaces) {
      auto [it, fresh] = face_region.try_emplace(face_key(v[f[0]], v[f[1]], v[f[2]]), 0xff);
      if (!fresh) face_region.erase(it);
    }
  }
  for (std::size_t t = 0; t < lattice_tets.size(); ++t) {
    if (inside[t]) continue;
    const auto& v = lattice_tets[t];
    std::uint8_t region = 0xff;
    for (const auto& f : kFaces) {
      auto it = face_region.find(face_key(v[f[0]], v[f[1]], v[f[2]]));
      if (it == face_region.end()) continue;
      if (region == 0xff) {
        Vec3 centre = 0.25 * (lattice_pos(v[0]) + lattice_pos(v[1]) + lattice_pos(v[2]) + lattice_pos(v[3]));
        region = static_cast<std::uint8_t>(bv.classify_exterior(centre));
      }
      it->second = region;
    }
  }

  Mesh mesh;
  mesh.edge_target = edge_target;
  std::vector<std::int64_t> node_id(lattice_nodes, -1);
  std::vector<std::uint8_t> seen;  // bit per SurfaceTag
  auto node = [&](std::uint32_t lid) {
    auto& id = node_id[lid];
    if (id < 0) {
      id = static_cast<std::int64_t>(mesh.nodes.size());
      mesh.nodes.push_back(lattice_pos(lid));
      seen.push_back(0);
    }
    return static_cast<std::uint32_t>(id);
  };
  for (std::size_t t = 0; t < lattice_tets.size(); ++t) {
    if (!inside[t]) continue;
    const auto& v = lattice_tets[t];
    mesh.tets.push_back({node(v[0]), node(v[1]), node(v[2]), node(v[3])});
  }
  for (const auto& [key, region] : face_region) {
    if (region == 0xff) throw TopologyError("lattice boundary face without an exterior tet");
    for (std::uint64_t lid : {key >> 42, (key >> 21) & 0x1fffff, key & 0x1fffff})
      seen[static_cast<std::size_t>(node_id[lid])] |= static_cast<std::uint8_t>(1u << region);
  }
  lattice_tets.clear();
  lattice_tets.shrink_to_fit();
  orient_positive(mesh);
  const std::size_t n = mesh.nodes.size();
  auto has = [&](std::size_t i, SurfaceTag t) { return (seen[i] >> static_cast<int>(t)) & 1u; };

  mesh.surface.assign(n, SurfaceTag::none);
  for (std::size_t i = 0; i < n; ++i) {
    bool lv = has(i, SurfaceTag::lv_endo), rv = has(i, SurfaceTag::rv_endo), epi = has(i, SurfaceTag::epi);
    if ((lv || rv) && epi) {
      std::ostringstream ss;
      ss << "boundary node " << i << " touches both endocardial and epicardial faces; refine edge_target";
      throw TopologyError(ss.str());
    }
    if (lv && rv) throw TopologyError("boundary node touches both LV and RV endocardium");
    if (lv)
      mesh.surface[i] = SurfaceTag::lv_endo;
    else if (rv)
      mesh.surface[i] = SurfaceTag::rv_endo;
    else if (epi)
      mesh.surface[i] = SurfaceTag::epi;
    else if (has(i, SurfaceTag::base))
      mesh.surface[i] = SurfaceTag::base;
  }

  // Snap boundary nodes onto the analytic surfaces. A move is shortened
  // until every incident tet keeps at least 10% of the lattice tet volume.
  const Csr incident = node_to_tets(mesh);
  const double min_volume = 0.1 * h * h * h / 6.0;
  std::size_t partial = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mesh.surface[i] == SurfaceTag::none) continue;
    const bool on_base = has(i, SurfaceTag::base);
    Vec3 target = mesh.nodes[i];
    if (on_base) target.z() = 0.0;
    if (mesh.surface[i] != SurfaceTag::base) target = bv.snap_target(target, mesh.surface[i], on_base);
    const Vec3 start = mesh.nodes[i];
    bool moved = false;
    for (double frac : {1.0, 0.5, 0.25}) {
      mesh.nodes[i] = start + frac * (target - start);
      bool ok = true;
      for (auto t : incident[i])
        if (signed_volume(mesh, t) < min_volume) {
          ok = false;
          break;
        }
      if (ok) {
        moved = true;
        partial += frac < 1.0;
        break;
      }
    }
    if (!moved) {
      mesh.nodes[i] = start;
      ++partial;
    }
  }
  if (partial > 0) {
    std::ostringstream ss;
    ss << partial << " boundary nodes only partially snapped to their surface";
    log::debug(ss.str());
  }

  const double theta = anterior_junction_angle(bv);
  mesh.frame.base_center = Vec3::Zero();
  mesh.frame.axis = Vec3::UnitZ();
  mesh.frame.rt_zero = Vec3(std::cos(theta), std::sin(theta), 0.0);
  mesh.frame.rt_quarter = Vec3(std::cos(theta - std::numbers::pi / 2), std::sin(theta - std::numbers::pi / 2), 0.0);
  validate_mesh(mesh);
  return mesh;
}

VentricularCoords compute_ventricular_coordinates(const Mesh& mesh) {
  const std::size_t n = mesh.nodes.size();
  if (mesh.surface.size() != n) throw TopologyError("mesh has no surface classification");
  for (const auto& f : boundary_faces(mesh))
    for (auto v : f.nodes)
      if (mesh.surface[v] == SurfaceTag::none) {
        std::ostringstream ss;
        ss << "boundary node " << v << " is not classified as endo/epi/base";
        throw TopologyError(ss.str());
      }

  // Each ventricle gets its own harmonic field (own endo = 1, epi and the
  // other endo = 0) and tm is their maximum, so the septum keeps a
  // transmural gradient instead of being pinned to 1 from both sides.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> lv_fixed(n, nan), rv_fixed(n, nan);
  bool any_lv = false, any_rv = false, any_epi = false;
  for (std::size_t i = 0; i < n; ++i) {
    switch (mesh.surface[i]) {
      case SurfaceTag::lv_endo:
        lv_fixed[i] = 1.0;
        rv_fixed[i] = 0.0;
        any_lv = true;
        break;
      case SurfaceTag::rv_endo:
        lv_fixed[i] = 0.0;
        rv_fixed[i] = 1.0;
        any_rv = true;
        break;
      case SurfaceTag::epi:
        lv_fixed[i] = rv_fixed[i] = 0.0;
        any_epi = true;
        break;
      default: break;
    }
  }
  if (!(any_lv || any_rv) || !any_epi) throw TopologyError("mesh needs both endocardial and epicardial surfaces");

  const SparseMatrix K = stiffness_matrix(mesh);
  VentricularCoords c;
  std::vector<double> tm_lv = any_lv ? solve_laplace(K, lv_fixed) : std::vector<double>(n, 0.0);
  std::vector<double> tm_rv = any_rv ? solve_laplace(K, rv_fixed) : std::vector<double>(n, 0.0);
  c.tm.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.tm[i] = std::max(tm_lv[i], tm_rv[i]);

  std::vector<double> tv(n, any_lv ? 1.0 : 0.0);
  if (any_lv && any_rv) {
    std::vector<double> tv_fixed(n, nan);
    for (std::size_t i = 0; i < n; ++i) {
      if (mesh.surface[i] == SurfaceTag::lv_endo) tv_fixed[i] = 1.0;
      if (mesh.surface[i] == SurfaceTag::rv_endo) tv_fixed[i] = 0.0;
    }
    tv = solve_laplace(K, tv_fixed);
  }

  const HeartFrame& fr = mesh.frame;
  double apex_height = 0.0;
  for (const auto& p : mesh.nodes) apex_height = std::min(apex_height, (p - fr.base_center).dot(fr.axis));
  if (!(apex_height < 0.0)) throw TopologyError("no node lies below the base plane");

  c.ab.resize(n);
  c.rt.resize(n);
  c.tv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d = mesh.nodes[i] - fr.base_center;
    double height = d.dot(fr.axis);
    c.ab[i] = std::clamp((height - apex_height) / -apex_height, 0.0, 1.0);
    double angle = std::atan2(d.dot(fr.rt_quarter), d.dot(fr.rt_zero));
    double rt = angle / (2.0 * std::numbers::pi);
    rt -= std::floor(rt);
    c.rt[i] = rt >= 1.0 ? 0.0 : rt;
    c.tv[i] = tv[i] >= 0.5 ? Ventricle::lv : Ventricle::rv;
  }
  return c;
}

std::vector<LocalFrame> local_frames(const Mesh& mesh, const VentricularCoords& coords) {
  const std::size_t n = mesh.nodes.size(), m = mesh.tets.size();
  if (coords.tm.size() != n) throw ValidationError("coordinates do not match the mesh");
  std::vector<Vec3> nodal(n, Vec3::Zero());
  std::vector<double> weight(n, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    auto g = basis_gradients(mesh, t);
    const auto& k = mesh.tets[t];
    Vec3 grad = Vec3::Zero();
    for (int i = 0; i < 4; ++i) grad += coords.tm[k[i]] * g[i];
    double vol = signed_volume(mesh, t);
    for (auto v : k) {
      nodal[v] += vol * grad;
      weight[v] += vol;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (weight[i] > 0.0) nodal[i] /= weight[i];

  std::vector<LocalFrame> frames(m);
  const Vec3 axis = mesh.frame.axis;
  for (std::size_t t = 0; t < m; ++t) {
    const auto& k = mesh.tets[t];
    Vec3 grad = 0.25 * (nodal[k[0]] + nodal[k[1]] + nodal[k[2]] + nodal[k[3]]);
    LocalFrame& fr = frames[t];
    // Gradients below ~1/20 of a typical 1/wall magnitude carry no direction.
    if (grad.norm() < 0.05) continue;
    fr.transmural = grad.normalized();
    Vec3 lon = axis - axis.dot(fr.transmural) * fr.transmural;
    if (lon.norm() < 0.05) continue;
    fr.longitudinal = lon.normalized();
    fr.circumferential = fr.longitudinal.cross(fr.transmural);
    fr.valid = true;
  }
  return frames;
}

double helix_angle_deg(const Vec3& f, const LocalFrame& frame) {
  return std::atan2(f.dot(frame.longitudinal), f.dot(frame.circumferential)) * 180.0 / std::numbers::pi;
}

FiberField assign_fibers(const Mesh& mesh, const VentricularCoords& coords, double alpha_endo_deg,
                         double alpha_epi_deg) {
  const std::size_t m = mesh.tets.size();
  FiberField field;
  field.frames.resize(m);
  field.fallback.assign(m, 0);
  std::vector<std::uint8_t> have(m, 0);
  const auto local = local_frames(mesh, coords);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& fr = local[t];
    if (!fr.valid) continue;
    const auto& k = mesh.tets[t];
    double tm = 0.25 * (coords.tm[k[0]] + coords.tm[k[1]] + coords.tm[k[2]] + coords.tm[k[3]]);
    double alpha = (alpha_epi_deg + (alpha_endo_deg - alpha_epi_deg) * tm) * std::numbers::pi / 180.0;
    FiberFrame& ff = field.frames[t];
    ff.f = (std::cos(alpha) * fr.circumferential + std::sin(alpha) * fr.longitudinal).normalized();
    ff.s = fr.transmural;
    ff.n = ff.f.cross(ff.s);
    have[t] = 1;
  }

  std::size_t missing = m - static_cast<std::size_t>(std::count(have.begin(), have.end(), 1));
  if (missing == m) throw TopologyError("no element has a valid fibre frame");
  if (missing > 0) {
    const Csr incident = node_to_tets(mesh);
    std::size_t filled_total = 0;
    while (missing > 0) {
      std::vector<std::uint8_t> next = have;
      std::size_t filled = 0;
      for (std::size_t t = 0; t < m; ++t) {
        if (have[t]) continue;
        Vec3 fs = Vec3::Zero(), ss = Vec3::Zero();
        for (auto v : mesh.tets[t])
          for (auto o : incident[v])
            if (have[o]) {
              // Align signs so antiparallel neighbours do not cancel.
              const auto& nb = field.frames[o];
              fs += (fs.dot(nb.f) < 0.0 ? -1.0 : 1.0) * nb.f;
              ss += (ss.dot(nb.s) < 0.0 ? -1.0 : 1.0) * nb.s;
            }
        if (ss.norm() < 1e-12) continue;
        Vec3 s = ss.normalized();
        Vec3 f = fs - fs.dot(s) * s;
        if (f.norm() < 1e-12) f = s.unitOrthogonal();
        FiberFrame& ff = field.frames[t];
        ff.s = s;
        ff.f = f.normalized();
        ff.n = ff.f.cross(ff.s);
        field.fallback[t] = 1;
        next[t] = 1;
        ++filled;
      }
      if (filled == 0) throw TopologyError("fibre fallback cannot reach isolated elements");
      have = std::move(next);
      missing -= filled;
      filled_total += filled;
    }
    std::ostringstream ss;
    ss << filled_total << " elements without a local frame (apex or flat tm) took neighbour-averaged fibres";
    log::warn(ss.str());
  }
  return field;
}

ElectrodeSet place_electrodes(const Mesh& mesh, const ElectrodeLayout& layout) {
  if (mesh.nodes.empty()) throw PlacementError("cannot place electrodes on an empty mesh");
  const HeartFrame& fr = mesh.frame;
  double radius = 0.0, apex_height = 0.0;
  for (const auto& p : mesh.nodes) {
    Vec3 d = p - fr.base_center;
    double height = d.dot(fr.axis);
    apex_height = std::min(apex_height, height);
    radius = std::max(radius, (d - height * fr.axis).norm());
  }
  // Anterior (+x) and patient-left (+y) projected orthogonal to the axis.
  Vec3 anterior = (Vec3::UnitX() - Vec3::UnitX().dot(fr.axis) * fr.axis).normalized();
  Vec3 left = fr.axis.cross(anterior);

  ElectrodeSet set;
  const Vec3 chest_centre = fr.base_center + layout.precordial_depth * apex_height * fr.axis;
  const double chest_radius = radius + layout.chest_margin;
  for (std::size_t i = 0; i < 6; ++i) {
    double a = layout.precordial_angles_deg[i] * std::numbers::pi / 180.0;
    set.positions[3 + i] = chest_centre + chest_radius * (std::cos(a) * anterior + std::sin(a) * left);
  }
  const double torso = layout.torso_scale * radius;
  const Vec3 mid = fr.base_center + 0.5 * apex_height * fr.axis;
  set[Electrode::RA] = mid + torso * (-1.0 * left + 0.8 * fr.axis);
  set[Electrode::LA] = mid + torso * (1.0 * left + 0.8 * fr.axis);
  set[Electrode::LL] = mid + torso * (0.3 * left - 1.5 * fr.axis);

  for (std::size_t e = 0; e < kElectrodeCount; ++e) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& p : mesh.nodes) closest = std::min(closest, (p - set.positions[e]).norm());
    if (closest <= layout.min_clearance) {
      std::ostringstream ss;
      ss << "electrode " << kElectrodeNames[e] << " is " << closest << " cm from the myocardium";
      throw PlacementError(ss.str());
    }
  }
  return set;
}

}  // namespace cardiotwin::geometry
