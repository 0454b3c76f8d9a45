#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cardiotwin/ecg.hpp"
#include "cardiotwin/errors.hpp"
#include "support.hpp"

using namespace cardiotwin;
using namespace cardiotwin::ecg;

namespace {

geometry::ElectrodeSet ring(double radius) {
  geometry::ElectrodeSet e;
  for (std::size_t k = 0; k < geometry::kElectrodeCount; ++k) {
    const double a = 2.0 * M_PI * static_cast<double>(k) / geometry::kElectrodeCount + 0.3;
    e.positions[k] = Vec3(radius * std::cos(a), radius * std::sin(a), 0.4 * static_cast<double>(k) - 1.5);
  }
  return e;
}

reaction::VoltageTraces single_frame(const std::vector<double>& u) {
  reaction::VoltageTraces t;
  t.nodes = u.size();
  t.samples = 1;
  t.sample_period = 1.0;
  for (double v : u) t.u.push_back(static_cast<float>(v));
  return t;
}

double potential(const Mesh& m, const std::vector<double>& u, const Vec3& e) {
  geometry::ElectrodeSet set;
  set.positions.fill(Vec3(40, 40, 40));
  set.positions[0] = e;
  return electrode_potentials(m, single_frame(u), set).phi[0][0];
}

EcgRecord ramp_record(std::size_t n, double period) {
  EcgRecord r;
  r.sample_period = period;
  for (std::size_t l = 0; l < kLeadCount; ++l)
    for (std::size_t k = 0; k < n; ++k)
      r.leads[l].push_back(std::sin(0.05 * static_cast<double>(k) * static_cast<double>(l + 1)) * (l + 1.0));
  return r;
}

}  // namespace

TEST_CASE("lead field: uniform voltage gives zero potential") {
  const Mesh m = testing::two_tet_fixture();
  const auto p = electrode_potentials(m, single_frame(std::vector<double>(5, 0.8)), ring(6.0));
  for (const auto& phi : p.phi) CHECK(std::abs(phi[0]) < 1e-12);
}

TEST_CASE("lead field: two-tet dipole matches the element formula; sign and decay") {
  const Mesh m = testing::two_tet_fixture();
  // Values exact in single precision, since traces are stored as float.
  const std::vector<double> u = {0.0, 0.375, 0.5, 0.25, 1.0};
  for (const Vec3& e : {Vec3(5, 0, 0), Vec3(-3, 2, 1), Vec3(0.5, -4, 2), Vec3(2, 2, 6)}) {
    const double got = potential(m, u, e), want = testing::dipole_potential(m, u, e);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
  // Depolarized side facing the electrode (a receding front) reads negative;
  // the resting side facing it (an approaching front) reads positive.
  const std::vector<double> ramp = {0.0, 0.5, 0.5, 0.5, 1.0};
  CHECK(potential(m, ramp, Vec3(6, 0, 0)) < 0.0);
  CHECK(potential(m, ramp, Vec3(-6, 0, 0)) > 0.0);
  const double near = std::abs(potential(m, ramp, Vec3(4, 0, 0))), far = std::abs(potential(m, ramp, Vec3(8, 0, 0)));
  CHECK(far < near);
  // Far field of a dipole: 1/r^2.
  const double a = potential(m, ramp, Vec3(200, 0, 0)), b = potential(m, ramp, Vec3(400, 0, 0));
  CHECK(a / b == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("lead field: mirror symmetry and linearity") {
  const Mesh m = testing::two_tet_fixture();
  const std::vector<double> u = {0.25, 0.375, 0.125, 0.75, 0.875};
  const std::vector<double> mirrored = {0.875, 0.375, 0.125, 0.75, 0.25};  // nodes 0 and 4 are x-mirror images
  const Vec3 e(3, 1.5, -2);
  CHECK(potential(m, u, e) == doctest::Approx(potential(m, mirrored, Vec3(-3, 1.5, -2))).epsilon(1e-12));

  const std::vector<double> v = {1.0, -0.25, 0.625, 0.0, 0.125};
  std::vector<double> mix(5);
  for (int i = 0; i < 5; ++i) mix[i] = 2.5 * u[i] - 0.75 * v[i];
  CHECK(potential(m, mix, e) ==
        doctest::Approx(2.5 * potential(m, u, e) - 0.75 * potential(m, v, e)).epsilon(1e-12));
}

TEST_CASE("lead field: electrode inside the mesh is rejected") {
  const Mesh m = testing::two_tet_fixture();
  auto set = ring(6.0);
  set.positions[4] = Vec3(0.1, 0.1, 0.1);
  CHECK_THROWS_AS(lead_field(m, set), PlacementError);
}

TEST_CASE("derive_leads: Einthoven and Wilson definitions") {
  Potentials p;
  p.sample_period = 1.0;
  Rng rng(5);
  for (auto& phi : p.phi)
    for (int k = 0; k < 40; ++k) phi.push_back(rng.uniform(-3, 3));
  const auto r = derive_leads(p);
  for (std::size_t k = 0; k < 40; ++k) {
    const double ra = p.phi[0][k], la = p.phi[1][k], ll = p.phi[2][k];
    CHECK(r.leads[0][k] == la - ra);
    CHECK(r.leads[1][k] == ll - ra);
    // Lead III from the derived leads equals LL - LA.
    const double iii = r.leads[1][k] - r.leads[0][k];
    CHECK(std::abs(iii - (ll - la)) <= 1e-12 * (std::abs(ll) + std::abs(la) + std::abs(ra)));
    for (std::size_t v = 0; v < 6; ++v) CHECK(r.leads[2 + v][k] == doctest::Approx(p.phi[3 + v][k] - (ra + la + ll) / 3.0));
  }
  // A common-mode offset on every electrode cancels.
  Potentials q = p;
  for (auto& phi : q.phi)
    for (double& x : phi) x += 7.0;
  const auto rq = derive_leads(q);
  for (std::size_t l = 0; l < kLeadCount; ++l)
    for (std::size_t k = 0; k < 40; ++k) CHECK(rq.leads[l][k] == doctest::Approx(r.leads[l][k]).epsilon(1e-12));

  Potentials missing = p;
  missing.phi[5].clear();
  CHECK_THROWS_AS(derive_leads(missing), ValidationError);
  missing = p;
  missing.phi[2].pop_back();
  CHECK_THROWS_AS(derive_leads(missing), ValidationError);
}

TEST_CASE("resample: length, unit peak, constants, zero records, scale invariance") {
  const auto r = ramp_record(451, 1.0);
  const auto out = normalize_and_resample(r);
  CHECK(out.samples() == 512);
  CHECK(out.normalized);
  CHECK(out.sample_period == doctest::Approx(450.0 / 511.0));
  double peak = 0.0;
  for (const auto& lead : out.leads)
    for (double v : lead) peak = std::max(peak, std::abs(v));
  CHECK(peak == 1.0);
  // Endpoints are carried over exactly (up to the common scale).
  for (std::size_t l = 0; l < kLeadCount; ++l) {
    CHECK(out.leads[l].front() == doctest::Approx(r.leads[l].front() / out.scale));
    CHECK(out.leads[l].back() == doctest::Approx(r.leads[l].back() / out.scale));
  }

  EcgRecord constant = r;
  for (auto& lead : constant.leads) std::fill(lead.begin(), lead.end(), -2.0);
  for (const auto& lead : normalize_and_resample(constant).leads)
    for (double v : lead) CHECK(v == -1.0);

  EcgRecord zero = r;
  for (auto& lead : zero.leads) std::fill(lead.begin(), lead.end(), 0.0);
  const auto z = normalize_and_resample(zero);
  CHECK(!z.normalized);
  CHECK(z.samples() == 512);

  EcgRecord scaled = r;
  for (auto& lead : scaled.leads)
    for (double& v : lead) v *= 37.5;
  const auto s = normalize_and_resample(scaled);
  for (std::size_t l = 0; l < kLeadCount; ++l)
    for (std::size_t k = 0; k < 512; ++k) CHECK(s.leads[l][k] == doctest::Approx(out.leads[l][k]).epsilon(1e-12));

  EcgRecord empty;
  CHECK_THROWS_AS(normalize_and_resample(empty), ValidationError);
  CHECK_THROWS_AS(normalize_and_resample(r, 1), ParameterError);
}

TEST_CASE("ctecg round trip is byte exact") {
  auto r = normalize_and_resample(ramp_record(300, 1.0));
  r.scenario = "transmural_septal";
  r.seed = 123456789012345ull;
  r.metadata = R"({"mesh_id":"m0"})";
  const auto dir = testing::scratch_dir("ctecg");
  write_ctecg(dir / "a.ctecg", r);
  const auto back = read_ctecg(dir / "a.ctecg");
  CHECK(back.scenario == r.scenario);
  CHECK(back.seed == r.seed);
  CHECK(back.normalized);
  CHECK(back.samples() == 512);
  CHECK(back.sample_period == doctest::Approx(r.sample_period));
  for (std::size_t l = 0; l < kLeadCount; ++l)
    for (std::size_t k = 0; k < 512; ++k) CHECK(back.leads[l][k] == doctest::Approx(r.leads[l][k]).epsilon(1e-8));
  write_ctecg(dir / "b.ctecg", back);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "a.ctecg") == slurp(dir / "b.ctecg"));

  std::ofstream(dir / "junk.ctecg") << "not,a,record\n";
  CHECK_THROWS_AS(read_ctecg(dir / "junk.ctecg"), ValidationError);
  CHECK_THROWS_AS(read_ctecg(dir / "none.ctecg"), IoError);
  EcgRecord bad = r;
  bad.metadata = "two\nlines";
  CHECK_THROWS_AS(write_ctecg(dir / "c.ctecg", bad), ValidationError);
}

TEST_CASE("heart: per-electrode weights sum to zero") {
  const auto& h = testing::coarse_heart();
  const auto field = lead_field(h.mesh, h.electrodes);
  for (const auto& w : field.weights) {
    double sum = 0.0, mag = 0.0;
    for (double x : w) {
      sum += x;
      mag += std::abs(x);
    }
    // A uniform voltage has no gradient, so it must produce no potential.
    CHECK(std::abs(sum) <= 1e-9 * mag);
  }
}
