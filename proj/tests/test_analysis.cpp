#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cardiotwin/analysis.hpp"
#include "cardiotwin/errors.hpp"
#include "support.hpp"

using namespace cardiotwin;
using namespace cardiotwin::analysis;

namespace {

/// Synthetic beat: biphasic QRS at `qrs_ms`, ST offset `st`, broad T wave.
ecg::EcgRecord beat(double qrs_ms, double st = 0.0, double t_amp = 0.3, double baseline = 0.0) {
  ecg::EcgRecord r;
  r.sample_period = 1.0;
  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
    const double gain = 0.4 + 0.1 * static_cast<double>(l);
    for (std::size_t k = 0; k < 500; ++k) {
      const double t = static_cast<double>(k);
      const double q = (t - qrs_ms) / 8.0;
      const double qrs = -gain * q * std::exp(-0.5 * q * q);
      const double plateau = st / (1.0 + std::exp(-(t - qrs_ms - 15.0))) / (1.0 + std::exp((t - qrs_ms - 200.0) / 10.0));
      const double tw = (t - qrs_ms - 240.0) / 35.0;
      r.leads[l].push_back(baseline + qrs + plateau + t_amp * gain * std::exp(-0.5 * tw * tw));
    }
  }
  return r;
}

std::vector<double> random_series(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

}  // namespace

TEST_CASE("dtw: identity, enumeration oracle, symmetry, errors") {
  const std::vector<double> a = {0, 0, 1}, b = {0, 1};
  CHECK(dtw(a, b) == 0.0);
  CHECK(testing::dtw_enumerate(a, b) == 0.0);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_series(rng, 1 + rng.index(7)), y = random_series(rng, 1 + rng.index(7));
    CHECK(dtw(x, y) == doctest::Approx(testing::dtw_enumerate(x, y)).epsilon(1e-12));
    CHECK(dtw(x, y) == dtw(y, x));
    CHECK(dtw(x, x) == 0.0);
  }
  const std::vector<double> empty;
  CHECK_THROWS_AS(dtw(empty, a), ValidationError);
  CHECK_THROWS_AS(dtw(a, empty), ValidationError);
}

TEST_CASE("dtw matrix: zero diagonal, avg <= max, duplicates, thread independence") {
  std::vector<ecg::EcgRecord> recs = {beat(60), beat(80), beat(60, 0.2), beat(60)};
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  const auto m = dtw_matrix(recs, names, 1);
  REQUIRE(m.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(m.max_at(i, i) == 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(m.max_at(i, j) == m.max_at(j, i));
      CHECK(m.avg_at(i, j) <= m.max_at(i, j) + 1e-12);
    }
  }
  CHECK(m.max_at(0, 3) == 0.0);
  CHECK(m.max_at(0, 2) > 0.0);
  const auto p = dtw_matrix(recs, names, 3);
  CHECK(p.max == m.max);
  CHECK(p.avg == m.avg);
  recs[1].leads[0].pop_back();
  CHECK_THROWS(dtw_matrix(recs, names, 1));
}

TEST_CASE("features: ordering, shift and baseline invariance, flat records") {
  const auto f = extract_features(beat(60));
  CHECK(f.qrs_onset_ms < 60.0);
  CHECK(f.qrs_offset_ms > 60.0);
  CHECK(f.qrs_duration_ms > 10.0);
  CHECK(f.qrs_duration_ms < 80.0);
  CHECK(f.qt_interval_ms >= f.qrs_duration_ms);
  CHECK(f.t_peak_ms == doctest::Approx(300.0).epsilon(0.03));
  CHECK(f.t_end_ms > f.t_peak_ms);

  const auto shifted = extract_features(beat(80));
  CHECK(std::abs(shifted.qrs_duration_ms - f.qrs_duration_ms) < 4.0);
  CHECK(shifted.qrs_onset_ms - f.qrs_onset_ms == doctest::Approx(20.0).epsilon(0.1));

  const auto lifted = extract_features(beat(60, 0.0, 0.3, 0.7));
  CHECK(lifted.qrs_duration_ms == f.qrs_duration_ms);

  const auto elevated = extract_features(beat(60, 0.25));
  CHECK(elevated.st_amplitude_mean > f.st_amplitude_mean + 0.1);

  ecg::EcgRecord flat = beat(60);
  for (auto& lead : flat.leads) std::fill(lead.begin(), lead.end(), 0.3);
  CHECK_THROWS_AS(extract_features(flat), FeatureError);
  ecg::EcgRecord tiny;
  tiny.sample_period = 1.0;
  for (auto& lead : tiny.leads) lead = {0.0, 1.0};
  CHECK_THROWS_AS(extract_features(tiny), FeatureError);

  CHECK(feature_names().size() == 5 + 3 * ecg::kLeadCount);
  CHECK(feature_vector(f).size() == feature_names().size());
}

TEST_CASE("z-scores: oracle, NA columns, replicate floor, group contrasts") {
  std::vector<PhenotypeFeatures> healthy;
  for (int r = 0; r < 8; ++r) healthy.push_back(extract_features(beat(60.0 + r, 0.01 * r)));
  const std::vector<PhenotypeFeatures> scen = {extract_features(beat(63, 0.3)), extract_features(beat(63.5, 0.035)),
                                               extract_features(beat(64, 0.1))};
  const std::vector<std::string> names = {"transmural_septal", "subendocardial_septal", "healthy"};
  const auto t = zscores(scen, names, healthy);
  REQUIRE(t.scenarios.size() == 3);
  REQUIRE(t.features.size() == feature_names().size());

  // Independent recomputation for one column.
  const std::size_t col = t.column("st_amplitude_V2");
  const std::size_t idx = 5 + ecg::kLeadCount + 3;
  REQUIRE(feature_names()[idx] == "st_amplitude_V2");
  double mean = 0.0;
  for (const auto& h : healthy) mean += feature_vector(h)[idx];
  mean /= 8.0;
  double ss = 0.0;
  for (const auto& h : healthy) ss += std::pow(feature_vector(h)[idx] - mean, 2);
  const double sd = std::sqrt(ss / 7.0);
  CHECK(col == idx);
  CHECK(t.at(0, col) == doctest::Approx((feature_vector(scen[0])[idx] - mean) / sd));

  // A feature identical across replicates has no usable spread.
  std::vector<PhenotypeFeatures> same(8, healthy[0]);
  const auto na = zscores(scen, names, same);
  CHECK(na.na(0, na.column("qrs_duration_ms")));
  CHECK(std::isnan(qrs_abs_z(na, 0)));

  CHECK_THROWS_AS(zscores(scen, names, std::vector<PhenotypeFeatures>(healthy.begin(), healthy.begin() + 7)),
                  ValidationError);
  CHECK_THROWS_AS(t.column("nope"), ValidationError);

  const auto st = contrast(t, st_abs_z);
  CHECK(st.transmural_rows == 1);
  CHECK(st.subendocardial_rows == 1);
  CHECK(st.transmural > st.subendocardial);
  CHECK(st_abs_z(t, 0) == st.transmural);
}

TEST_CASE("heatmap svg is well formed and greys out NaN") {
  const auto svg = heatmap_svg("t", {"a", "b"}, {"x", "y"}, {0.0, 1.0, std::nan(""), -1.0}, true);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("rgb(200,200,200)") != std::string::npos);
}

TEST_CASE("analyze the tiny cohort") {
  const auto out = testing::scratch_dir("analysis");
  const auto res = analyze_cohort(testing::tiny_cohort(), out, 1);
  CHECK(res.meshes == 1);
  CHECK(res.dtw.size() == 17);
  CHECK(res.z.scenarios.size() == 17);
  for (const char* f : {"dtw_max.csv", "dtw_avg.csv", "features.csv", "zscores.csv", "dtw_max.svg", "dtw_avg.svg",
                        "zscores.svg", "analysis.json"})
    CHECK(std::filesystem::exists(out / f));
  for (std::size_t i = 0; i < 17; ++i) CHECK(res.dtw.max_at(i, i) == 0.0);
  std::ifstream is(out / "analysis.json");
  const auto doc = nlohmann::json::parse(is);
  CHECK(doc["meshes"] == 1);
  CHECK(doc.contains("st_amplitude_per_lead"));
  CHECK(doc.contains("qrs_duration"));
  CHECK(!doc.contains("zscore_error"));
}
