#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Dense>

#include "cardiotwin/aha.hpp"
#include "cardiotwin/errors.hpp"
#include "cardiotwin/geometry.hpp"
#include "cardiotwin/kdtree.hpp"
#include "cardiotwin/mesh_io.hpp"
#include "support.hpp"

using namespace cardiotwin;
using namespace cardiotwin::geometry;

TEST_CASE("mesh primitives on a box") {
  const Mesh box = make_box_mesh(Vec3::Zero(), Vec3(1, 2, 3), 0.5);
  validate_mesh(box);
  double vol = 0.0;
  for (std::size_t t = 0; t < box.tets.size(); ++t) vol += signed_volume(box, t);
  CHECK(vol == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(mean_edge_length(box) == doctest::Approx(0.5).epsilon(0.1));

  // Basis gradients sum to zero and reproduce linear fields.
  const auto g = basis_gradients(box, 7);
  CHECK((g[0] + g[1] + g[2] + g[3]).norm() < 1e-12);
  Vec3 grad = Vec3::Zero();
  for (int i = 0; i < 4; ++i) grad += box.nodes[box.tets[7][i]].dot(Vec3(1, -2, 3)) * g[i];
  CHECK((grad - Vec3(1, -2, 3)).norm() < 1e-12);

  // Boundary faces cover the box surface area 2(2 + 3 + 6) = 22.
  double area = 0.0;
  for (const auto& f : boundary_faces(box)) {
    const Vec3 n = (box.nodes[f.nodes[1]] - box.nodes[f.nodes[0]]).cross(box.nodes[f.nodes[2]] - box.nodes[f.nodes[0]]);
    area += 0.5 * n.norm();
    CHECK(n.dot(box.nodes[f.nodes[0]] - centroid(box, f.tet)) > 0.0);
  }
  CHECK(area == doctest::Approx(22.0).epsilon(1e-12));
}

TEST_CASE("validate_mesh rejects bad indices and inverted tets") {
  Mesh m = testing::two_tet_fixture();
  validate_mesh(m);
  Mesh bad = m;
  bad.tets[0][0] = 99;
  CHECK_THROWS_AS(validate_mesh(bad), ValidationError);
  Mesh inverted = m;
  std::swap(inverted.tets[0][0], inverted.tets[0][1]);
  CHECK_THROWS_AS(validate_mesh(inverted), ValidationError);
  CHECK(orient_positive(inverted) == 1);
  validate_mesh(inverted);
}

TEST_CASE("tet locator and interpolation") {
  const Mesh box = make_box_mesh(Vec3::Zero(), Vec3::Ones(), 0.3);
  const TetLocator loc(box);
  std::vector<double> f(box.nodes.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.0 * box.nodes[i].x() - box.nodes[i].z() + 0.5;
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vec3 p(rng.uniform(), rng.uniform(), rng.uniform());
    CHECK(loc.locate(p) >= 0);
    CHECK(loc.interpolate(f, p) == doctest::Approx(2.0 * p.x() - p.z() + 0.5).epsilon(1e-10));
  }
  CHECK(loc.locate(Vec3(2, 0.5, 0.5)) == -1);
  CHECK(std::isnan(loc.interpolate(f, Vec3(-1, 0, 0))));
}

TEST_CASE("kd-tree matches a linear scan") {
  Rng rng(5);
  std::vector<Vec3> pts(400);
  for (auto& p : pts) p = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
  const KdTree tree(pts);
  for (int k = 0; k < 40; ++k) {
    const Vec3 q(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2));
    const double r = rng.uniform(0.0, 0.4);
    std::vector<std::uint32_t> got;
    tree.radius_search(q, r, got);
    std::sort(got.begin(), got.end());
    std::vector<std::uint32_t> want;
    std::uint32_t best = 0;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - q).norm() <= r) want.push_back(i);
      if ((pts[i] - q).norm() < (pts[best] - q).norm()) best = i;
    }
    CHECK(got == want);
    CHECK(tree.any_within(q, r) == !want.empty());
    double d = 0.0;
    CHECK(tree.nearest(q, &d) == best);
    CHECK(d == doctest::Approx((pts[best] - q).norm()));
  }
}

TEST_CASE("generator: wall parameter errors") {
  WallParams w;
  w.lv_wall = 0.0;
  CHECK_THROWS_AS(generate_idealized_biventricle(w, 0.15, 7), ParameterError);
  w = WallParams{};
  w.lv_wall = 2.5;  // thicker than the cavity radius
  CHECK_THROWS_AS(generate_idealized_biventricle(w, 0.15, 7), ParameterError);
  w = WallParams{};
  w.lv_endo_radius = -1.0;
  CHECK_THROWS_AS(generate_idealized_biventricle(w, 0.15, 7), ParameterError);
  CHECK_THROWS_AS(generate_idealized_biventricle(WallParams{}, 0.5, 7), ParameterError);  // wall < 2 edges
}

TEST_CASE("generator: edge 0.15 mean edge in [0.105, 0.195] and valid") {
  const Mesh m = generate_idealized_biventricle(WallParams{}, 0.15, 7);
  validate_mesh(m);
  const double e = mean_edge_length(m);
  CHECK(e >= 0.105);
  CHECK(e <= 0.195);
  CHECK(m.edge_target == 0.15);
}

TEST_CASE("generator: determinism and seed dependence") {
  const Mesh a = generate_idealized_biventricle(WallParams{}, 0.25, 3);
  const Mesh b = generate_idealized_biventricle(WallParams{}, 0.25, 3);
  REQUIRE(a.nodes.size() == b.nodes.size());
  REQUIRE(a.tets == b.tets);
  bool same = true;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) same = same && a.nodes[i] == b.nodes[i];
  CHECK(same);
  CHECK(a.surface == b.surface);
  const Mesh c = generate_idealized_biventricle(WallParams{}, 0.25, 4);
  CHECK((c.nodes.size() != a.nodes.size() || c.nodes[0] != a.nodes[0]));
}

TEST_CASE("coords: endo = 1, epi = 0, apex ab = 0, base ab = 1") {
  const auto& h = testing::coarse_heart();
  const auto& m = h.mesh;
  std::size_t endo = 0, epi = 0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (is_endocardial(m.surface[i])) {
      CHECK(h.coords.tm[i] == 1.0);
      ++endo;
    }
    if (m.surface[i] == SurfaceTag::epi) {
      CHECK(h.coords.tm[i] == 0.0);
      ++epi;
    }
  }
  CHECK(endo > 100);
  CHECK(epi > 100);
  std::size_t apex = 0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    if (m.nodes[i].z() < m.nodes[apex].z()) apex = i;
  CHECK(h.coords.ab[apex] == 0.0);
  CHECK(*std::max_element(h.coords.ab.begin(), h.coords.ab.end()) == 1.0);
}

TEST_CASE("coords: tm strictly decreasing along 100 endo-to-epi rays") {
  const auto& h = testing::coarse_heart();
  const TetLocator loc(h.mesh);
  const WallParams w;
  Rng rng(11);
  int rays = 0;
  while (rays < 100) {
    const double theta = rng.uniform(40.0, 140.0) * std::numbers::pi / 180.0;  // LV free wall (+y)
    const double z = rng.uniform(-3.0, -0.6);
    const double r_in = w.lv_endo_radius * std::sqrt(1.0 - z * z / (w.lv_endo_half_length * w.lv_endo_half_length));
    const double he = w.lv_endo_half_length + w.lv_wall;
    const double r_out = (w.lv_endo_radius + w.lv_wall) * std::sqrt(1.0 - z * z / (he * he));
    const Vec3 dir(std::cos(theta), std::sin(theta), 0.0);
    double prev = 2.0;
    bool ok = true;
    for (int k = 1; k <= 9; ++k) {
      const double r = r_in + (r_out - r_in) * k / 10.0;
      const double tm = loc.interpolate(h.coords.tm, Vec3(0, 0, z) + r * dir);
      if (std::isnan(tm)) continue;
      ok = ok && tm < prev;
      prev = tm;
    }
    CHECK(ok);
    ++rays;
  }
}

TEST_CASE("coords: bounded fields") {
  const auto& c = testing::coarse_heart().coords;
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c.tm[i] >= 0.0);
    CHECK(c.tm[i] <= 1.0);
    CHECK(c.ab[i] >= 0.0);
    CHECK(c.ab[i] <= 1.0);
    CHECK(c.rt[i] >= 0.0);
    CHECK(c.rt[i] < 1.0);
  }
}

TEST_CASE("coords: unclassified boundary -> TopologyError") {
  Mesh box = make_box_mesh(Vec3::Zero(), Vec3::Ones(), 0.4);
  CHECK_THROWS_AS(compute_ventricular_coordinates(box), TopologyError);
  box.surface.assign(box.nodes.size(), SurfaceTag::none);
  CHECK_THROWS_AS(compute_ventricular_coordinates(box), TopologyError);
}

TEST_CASE("fibres: orthonormal right-handed triads, endo helix angle") {
  const auto& h = testing::coarse_heart();
  const auto frames = local_frames(h.mesh, h.coords);
  std::size_t near_endo = 0;
  for (std::size_t t = 0; t < h.mesh.tets.size(); ++t) {
    const auto& f = h.fibers.frames[t];
    CHECK(std::abs(f.f.norm() - 1.0) < 1e-6);
    CHECK(std::abs(f.s.norm() - 1.0) < 1e-6);
    CHECK(std::abs(f.n.norm() - 1.0) < 1e-6);
    CHECK(std::abs(f.f.dot(f.s)) < 1e-6);
    Eigen::Matrix3d m;
    m << f.f, f.s, f.n;
    CHECK(std::abs(m.determinant() - 1.0) < 1e-6);
    const auto& k = h.mesh.tets[t];
    const double tm = 0.25 * (h.coords.tm[k[0]] + h.coords.tm[k[1]] + h.coords.tm[k[2]] + h.coords.tm[k[3]]);
    if (tm == 1.0 && frames[t].valid) {
      CHECK(std::abs(helix_angle_deg(f.f, frames[t]) - 60.0) <= 2.0);
      ++near_endo;
    }
  }
  CHECK(near_endo > 0);
  const double fallback = std::count(h.fibers.fallback.begin(), h.fibers.fallback.end(), 1);
  CHECK(fallback / h.mesh.tets.size() < 0.01);
}

TEST_CASE("fibres: helix angle follows the linear rule") {
  const auto& h = testing::coarse_heart();
  const auto frames = local_frames(h.mesh, h.coords);
  for (std::size_t t = 0; t < h.mesh.tets.size(); t += 17) {
    if (!frames[t].valid) continue;
    const auto& k = h.mesh.tets[t];
    const double tm = 0.25 * (h.coords.tm[k[0]] + h.coords.tm[k[1]] + h.coords.tm[k[2]] + h.coords.tm[k[3]]);
    CHECK(std::abs(helix_angle_deg(h.fibers.frames[t].f, frames[t]) - (-60.0 + 120.0 * tm)) <= 2.0);
  }
}

TEST_CASE("fibres: zero helix angles give circumferential fibres") {
  const auto& h = testing::coarse_heart();
  const auto fib = assign_fibers(h.mesh, h.coords, 0.0, 0.0);
  const auto frames = local_frames(h.mesh, h.coords);
  for (std::size_t t = 0; t < h.mesh.tets.size(); ++t)
    if (frames[t].valid) CHECK(std::abs(std::abs(fib.frames[t].f.dot(frames[t].circumferential)) - 1.0) < 1e-9);
}

// Standard AHA table: basal 1 anterior, 2 anteroseptal, 3 inferoseptal,
// 4 inferior, 5 inferolateral, 6 anterolateral; mid = basal + 6; apical
// 13 anterior, 14 septal, 15 inferior, 16 lateral; 17 apex cap. Sector
// centres are written out by hand (rt = 0 at the anterior junction,
// increasing towards the septum).
TEST_CASE("aha: standard band and sector table") {
  struct Row {
    double d;  // distance from the base, 1 - ab
    double rt;
    int segment;
  };
  const Row table[] = {
      {0.15, 11.0 / 12, 1}, {0.15, 1.0 / 12, 2},  {0.15, 3.0 / 12, 3},  {0.15, 5.0 / 12, 4},
      {0.15, 7.0 / 12, 5},  {0.15, 9.0 / 12, 6},  {0.50, 11.0 / 12, 7}, {0.50, 1.0 / 12, 8},
      {0.50, 3.0 / 12, 9},  {0.50, 5.0 / 12, 10}, {0.50, 7.0 / 12, 11}, {0.50, 9.0 / 12, 12},
      {0.80, 0.95, 13},     {0.80, 0.01, 13},     {0.80, 1.0 / 6, 14},  {0.80, 5.0 / 12, 15},
      {0.80, 2.0 / 3, 16},  {0.97, 0.3, 17},      {0.999, 0.7, 17},
  };
  for (const auto& r : table) CHECK(aha::segment(1.0 - r.d, r.rt, Ventricle::lv) == r.segment);
  // ab = 0.85 in the anterior sextant is segment 1; the apex cap is ab < 0.05.
  CHECK(aha::segment(0.85, 0.9, Ventricle::lv) == 1);
  CHECK(aha::segment(0.04, 0.5, Ventricle::lv) == 17);
  CHECK_THROWS_AS(aha::segment(0.5, 0.5, Ventricle::rv), DomainError);
  CHECK_THROWS_AS(aha::segment(1.5, 0.5, Ventricle::lv), DomainError);
}

TEST_CASE("aha: partition of LV nodes, all segments populated") {
  const auto& c = testing::coarse_heart().coords;
  const auto seg = aha::segments(c);
  std::array<std::size_t, 18> count{};
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.tv[i] == Ventricle::rv) {
      CHECK(seg[i] == 0);
      continue;
    }
    REQUIRE(seg[i] >= 1);
    REQUIRE(seg[i] <= 17);
    ++count[seg[i]];
  }
  for (int s = 1; s <= 17; ++s) CHECK(count[s] > 0);
}

TEST_CASE("electrodes: clearance, determinism, V1 anterior of the septum") {
  const auto& h = testing::coarse_heart();
  const auto again = place_electrodes(h.mesh);
  const auto seg = aha::segments(h.coords);
  Vec3 septum = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < seg.size(); ++i)
    if (seg[i] == 2 || seg[i] == 3 || seg[i] == 8 || seg[i] == 9 || seg[i] == 14) {
      septum += h.mesh.nodes[i];
      ++n;
    }
  septum /= static_cast<double>(n);
  for (std::size_t e = 0; e < kElectrodeCount; ++e) {
    CHECK(again.positions[e] == h.electrodes.positions[e]);
    double closest = 1e9;
    for (const auto& p : h.mesh.nodes) closest = std::min(closest, (p - h.electrodes.positions[e]).norm());
    CHECK(closest > 1.0);
  }
  CHECK(h.electrodes[Electrode::V1].x() > septum.x());
  double gap = 1e9;
  for (const auto& e : h.electrodes.positions)
    for (const auto& p : h.mesh.nodes) gap = std::min(gap, (p - e).norm());
  ElectrodeLayout tight;
  tight.min_clearance = gap + 1e-6;
  CHECK_THROWS_AS(place_electrodes(h.mesh, tight), PlacementError);
  tight.min_clearance = gap - 1e-6;
  CHECK_NOTHROW(place_electrodes(h.mesh, tight));
}

TEST_CASE("ctmesh round trip keeps mesh, annotations and fields") {
  const auto& h = testing::coarse_heart();
  const auto dir = testing::scratch_dir("ctmesh");
  MeshFile f = pipeline::to_file(h);
  f.set_text("note", "hello");
  write_ctmesh(dir / "a.ctmesh", f);
  const MeshFile g = read_ctmesh(dir / "a.ctmesh");
  CHECK(g.mesh.tets == h.mesh.tets);
  CHECK(g.mesh.surface == h.mesh.surface);
  CHECK(g.mesh.edge_target == h.mesh.edge_target);
  CHECK(g.mesh.frame.rt_zero == h.mesh.frame.rt_zero);
  CHECK(g.text("note") == "hello");
  CHECK(g.node_field("tm") == h.coords.tm);
  write_ctmesh(dir / "b.ctmesh", g);
  std::ifstream a(dir / "a.ctmesh", std::ios::binary), b(dir / "b.ctmesh", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);

  const auto back = pipeline::from_file(g, RunConfig{});
  CHECK(back.coords.tv == h.coords.tv);
  CHECK(back.fibers.frames[5].f == h.fibers.frames[5].f);
  CHECK(back.electrodes.positions[4] == h.electrodes.positions[4]);

  std::ofstream(dir / "junk.ctmesh") << "NOTAMESH";
  CHECK_THROWS_AS(read_ctmesh(dir / "junk.ctmesh"), IoError);
  CHECK_THROWS_AS(read_ctmesh(dir / "missing.ctmesh"), IoError);
}
