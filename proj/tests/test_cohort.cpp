#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cardiotwin/cohort.hpp"
#include "cardiotwin/errors.hpp"
#include "cardiotwin/sample_io.hpp"
#include "support.hpp"

using namespace cardiotwin;
using namespace cardiotwin::cohort;

namespace {

double min_pairwise(const Mesh& m, const std::vector<std::uint32_t>& idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) best = std::min(best, (m.nodes[idx[a]] - m.nodes[idx[b]]).norm());
  return best;
}

const PreparedMesh& prepared() {
  static const PreparedMesh p = prepare_mesh("m000", testing::coarse_heart(), testing::tiny_cohort_config(), 3);
  return p;
}

const reaction::MsCalibration& calibration() {
  static const reaction::MsCalibration c(testing::tiny_cohort_config().reaction);
  return c;
}

}  // namespace

TEST_CASE("farthest-point sampling: size, order, spread, errors") {
  const auto& m = testing::coarse_heart().mesh;
  const auto fps = subsample_nodes(m, 200, 1);
  REQUIRE(fps.size() == 200);
  CHECK(std::is_sorted(fps.begin(), fps.end()));
  CHECK(std::set<std::uint32_t>(fps.begin(), fps.end()).size() == 200);
  CHECK(subsample_nodes(m, 200, 1) == fps);

  Rng rng(4);
  std::set<std::uint32_t> random;
  while (random.size() < 200) random.insert(static_cast<std::uint32_t>(rng.index(m.nodes.size())));
  CHECK(min_pairwise(m, fps) > min_pairwise(m, {random.begin(), random.end()}));

  const Mesh box = testing::box_with_nodes(5, 10, 10, 0.15);
  const auto all = subsample_nodes(box, 500, 2);
  for (std::uint32_t i = 0; i < 500; ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(subsample_nodes(box, 501, 2), ValidationError);
}

TEST_CASE("seeds and splits") {
  const auto cat = infarct::scenario_catalog();
  const auto& sub = infarct::find_scenario("subendocardial_septal");
  const auto& tra = infarct::find_scenario("transmural_septal");
  CHECK(scenario_seed(5, 0, sub) == scenario_seed(5, 0, tra));
  CHECK(scenario_seed(5, 0, tra) != scenario_seed(5, 1, tra));
  CHECK(scenario_seed(5, 0, tra) != scenario_seed(5, 0, infarct::find_scenario("transmural_apical")));
  CHECK(scenario_seed(5, 0, infarct::find_scenario("healthy")) != scenario_seed(5, 0, tra));
  std::set<std::uint64_t> seeds;
  for (const auto& s : cat) seeds.insert(scenario_seed(5, 0, s));
  CHECK(seeds.size() == 9);
  for (std::size_t r = 0; r < 8; ++r) CHECK(seeds.count(replicate_seed(5, 0, r)) == 0);

  std::size_t train = 0, val = 0, test = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto s = split_for(i, 20);
    train += s == "train";
    val += s == "val";
    test += s == "test";
  }
  CHECK(train == 14);
  CHECK(val == 3);
  CHECK(test == 3);
  CHECK(split_for(0, 1) == "train");
}

TEST_CASE("run_scenario: shapes, labels, determinism") {
  const auto cfg = testing::tiny_cohort_config();
  const auto healthy = run_scenario(prepared(), infarct::find_scenario("healthy"), 9, cfg, calibration());
  CHECK(healthy.sample.nodes == 256);
  CHECK(healthy.sample.samples == 256);
  CHECK(healthy.sample.x.size() == 256 * kXColumns);
  CHECK(healthy.sample.s.size() == 256 * 8);
  for (auto y : healthy.sample.y) CHECK(y == 0);
  CHECK(check_sample(healthy.sample, 256, 256).empty());
  CHECK(healthy.record.normalized);

  const auto& sc = infarct::find_scenario("transmural_lateral_large");
  const auto a = run_scenario(prepared(), sc, 17, cfg, calibration());
  const auto b = run_scenario(prepared(), sc, 17, cfg, calibration());
  CHECK(a.sample.x == b.sample.x);
  CHECK(a.sample.s == b.sample.s);
  CHECK(a.sample.y == b.sample.y);
  CHECK(a.sample.metadata == b.sample.metadata);
  CHECK(a.tissue.count(infarct::Tissue::scar) > 0);
  // X columns carry the node coordinates of the sampled nodes.
  const auto& h = testing::coarse_heart();
  for (std::size_t v = 0; v < 256; v += 31) {
    const auto node = prepared().sample_nodes[v];
    CHECK(a.sample.x[v * kXColumns + 0] == static_cast<float>(h.mesh.nodes[node].x()));
    CHECK(a.sample.x[v * kXColumns + 3] == static_cast<float>(h.coords.tm[node]));
    CHECK(a.sample.y[v] == static_cast<std::uint8_t>(a.tissue.labels[node]));
  }
  // Root jitter keeps the earliest root at 0 and changes the record.
  RunOptions jit;
  jit.root_jitter_seed = 1234;
  const auto j = run_scenario(prepared(), infarct::find_scenario("healthy"), 9, cfg, calibration(), jit);
  double first = 1e9;
  for (const auto& r : j.roots) {
    first = std::min(first, r.t_ms);
    CHECK(r.t_ms <= 2.0 * cfg.root_jitter_ms);
  }
  CHECK(first == 0.0);
  CHECK(j.sample.s != healthy.sample.s);
}

TEST_CASE("sample files: round trip, one-hot, schema checks") {
  CohortSample s;
  s.nodes = 3;
  s.samples = 2;
  s.x.assign(3 * kXColumns, 0.5f);
  s.s.assign(2 * 8, -0.25f);
  s.y = {0, 1, 2};
  s.metadata = R"({"format":"CTSAMP1"})";
  const auto dir = testing::scratch_dir("ctsamp");
  write_sample(dir / "a.ctsamp", s);
  const auto back = read_sample(dir / "a.ctsamp");
  CHECK(back.nodes == 3);
  CHECK(back.samples == 2);
  CHECK(back.x == s.x);
  CHECK(back.s == s.s);
  CHECK(back.y == s.y);
  CHECK(back.metadata == s.metadata);
  CHECK(s.one_hot() == std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(check_sample(s, 3, 2).empty());
  CHECK(!check_sample(s, 4, 2).empty());
  auto bad = s;
  bad.y[1] = 3;
  CHECK(!check_sample(bad, 3, 2).empty());
  bad = s;
  bad.s[3] = std::nanf("");
  CHECK(!check_sample(bad, 3, 2).empty());

  std::ofstream(dir / "b.ctsamp", std::ios::app) << "junk";
  CHECK_THROWS(read_sample(dir / "b.ctsamp"));
  {
    std::ifstream is(dir / "a.ctsamp", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    std::ofstream(dir / "c.ctsamp", std::ios::binary) << bytes << 'x';
  }
  CHECK_THROWS_AS(read_sample(dir / "c.ctsamp"), IoError);
}

TEST_CASE("sha256 and manifest round trip") {
  const auto dir = testing::scratch_dir("manifest");
  std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
  CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::vector<ManifestRow> rows = {{"m/a.ctsamp", "m", "healthy", "none", 42, std::string(64, 'a'), "train", "ok"},
                                   {"m/b.ctsamp", "m", "transmural_septal", "transmural", 18446744073709551615ull,
                                    std::string(64, 'b'), "val", "failed: boom"}};
  write_manifest(dir / "manifest.csv", rows);
  const auto back = read_manifest(dir / "manifest.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].seed == rows[1].seed);
  CHECK(back[1].status == "failed: boom");
  CHECK(back[0].file == "m/a.ctsamp");
  std::ofstream(dir / "bad.csv") << "file,mesh_id\nx,y\n";
  CHECK_THROWS(read_manifest(dir / "bad.csv"));
}

TEST_CASE("cohort directory: layout, manifest, validation, tamper detection") {
  const auto& dir = testing::tiny_cohort();
  const auto rows = read_manifest(dir / kManifestName);
  CHECK(rows.size() == 17);
  std::set<std::string> names;
  for (const auto& r : rows) {
    names.insert(r.scenario);
    CHECK(r.status.rfind("ok", 0) == 0);
    CHECK(r.split == "train");
    CHECK(r.sha256 == sha256_file(dir / r.file));
    const auto s = read_sample(dir / r.file);
    CHECK(check_sample(s, 256, 256).empty());
    const auto meta = nlohmann::json::parse(s.metadata);
    CHECK(meta["scenario"] == r.scenario);
    CHECK(meta["mesh_id"] == "m000");
  }
  CHECK(names.size() == 17);
  const auto reps = read_manifest(dir / kReplicateManifestName);
  CHECK(reps.size() == 8);
  CHECK(std::filesystem::exists(dir / "config.json"));

  const auto report = validate_path(dir, 256, 256);
  CHECK(report.ok());
  CHECK(report.checked >= 25);
  CHECK(!validate_path(dir, 4096, 512).ok());

  // Tamper with a copy.
  const auto copy = testing::scratch_dir("tampered");
  std::filesystem::copy(dir, copy, std::filesystem::copy_options::recursive);
  {
    std::fstream f(copy / rows[3].file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x01');
  }
  const auto tampered = validate_path(copy, 256, 256);
  CHECK(!tampered.ok());
  std::filesystem::remove(copy / rows[5].file);
  CHECK(validate_path(copy, 256, 256).problems.size() >= 2);
  CHECK_THROWS_AS(validate_path(copy / "missing_dir", 256, 256), IoError);
}
