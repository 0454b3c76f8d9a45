#include "cardiotwin/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"
#include "cardiotwin/parallel.hpp"
#include "cardiotwin/sample_io.hpp"

namespace cardiotwin::analysis {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> rms_series(const ecg::EcgRecord& r) {
  const std::size_t n = r.samples();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (const auto& lead : r.leads) s += lead[k] * lead[k];
    out[k] = std::sqrt(s / ecg::kLeadCount);
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<double>& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "scenario";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    os << names[i];
    for (std::size_t j = 0; j < names.size(); ++j) os << ',' << fmt(m[i * names.size() + j]);
    os << '\n';
  }
}

ecg::EcgRecord record_from_sample(const cohort::CohortSample& s) {
  const auto meta = nlohmann::json::parse(s.metadata);
  ecg::EcgRecord r;
  r.sample_period = meta.value("ecg_sample_period_ms", 0.0);
  if (!(r.sample_period > 0.0)) throw ValidationError("sample metadata lacks ecg_sample_period_ms");
  r.scenario = meta.value("scenario", "");
  r.seed = meta.value("seed", std::uint64_t{0});
  r.normalized = true;
  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
    r.leads[l].resize(s.samples);
    for (std::size_t k = 0; k < s.samples; ++k) r.leads[l][k] = s.s[k * ecg::kLeadCount + l];
  }
  return r;
}

// Running per-entry means that tolerate missing entries.
struct Accumulator {
  std::vector<double> sum;
  std::vector<std::size_t> count;
  explicit Accumulator(std::size_t n) : sum(n, 0.0), count(n, 0) {}
  void add(std::size_t i, double v) {
    if (std::isnan(v)) return;
    sum[i] += v;
    ++count[i];
  }
  double mean(std::size_t i) const { return count[i] ? sum[i] / static_cast<double>(count[i]) : kNaN; }
};

}  // namespace

double dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("dtw needs nonempty series");
  const std::size_t m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = std::abs(a[i - 1] - b[j - 1]) + best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

DtwMatrix dtw_matrix(const std::vector<ecg::EcgRecord>& records, const std::vector<std::string>& names,
                     unsigned jobs) {
  if (records.size() != names.size()) throw ValidationError("one name per record is required");
  const std::size_t n = records.size();
  for (const auto& r : records) {
    for (const auto& lead : r.leads)
      if (lead.size() != records.front().samples())
        throw ValidationError("records must share the sample count on every lead");
  }
  DtwMatrix out;
  out.names = names;
  out.max.assign(n * n, 0.0);
  out.avg.assign(n * n, 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), jobs, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    double mx = 0.0, sum = 0.0;
    for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
      const double d = dtw(records[i].leads[l], records[j].leads[l]);
      mx = std::max(mx, d);
      sum += d;
    }
    const double avg = sum / ecg::kLeadCount;
    out.max[i * n + j] = out.max[j * n + i] = mx;
    out.avg[i * n + j] = out.avg[j * n + i] = avg;
  });
  return out;
}

PhenotypeFeatures extract_features(const ecg::EcgRecord& r) {
  const std::size_t n = r.samples();
  const double dt = r.sample_period;
  if (n < 3) throw FeatureError("record too short for feature extraction");
  if (!(dt > 0.0)) throw FeatureError("record has no sample period");
  for (const auto& lead : r.leads)
    if (lead.size() != n) throw FeatureError("leads differ in length");

  std::vector<double> deriv(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double s = 0.0;
    for (const auto& lead : r.leads) {
      const double d = (lead[k + 1] - lead[k]) / dt;
      s += d * d;
    }
    deriv[k] = std::sqrt(s / ecg::kLeadCount);
  }
  const double dmax = *std::max_element(deriv.begin(), deriv.end());
  if (!(dmax > 1e-12)) throw FeatureError("flat record: no QRS detectable");
  const double thr = kQrsThreshold * dmax;
  const auto window = static_cast<std::size_t>(kQrsWindow * static_cast<double>(n - 1));
  std::size_t on = n, off = n;
  for (std::size_t k = 0; k < std::min(window, deriv.size()); ++k) {
    if (deriv[k] > thr) {
      if (on == n) on = k;
      off = k;
    }
  }
  if (on == n) throw FeatureError("no QRS upstroke inside the leading window");

  PhenotypeFeatures f;
  f.qrs_onset_ms = static_cast<double>(on) * dt;
  f.qrs_offset_ms = static_cast<double>(off + 1) * dt;
  f.qrs_duration_ms = f.qrs_offset_ms - f.qrs_onset_ms;
  const std::size_t k_off = off + 1;

  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
    double m = 0.0;
    for (std::size_t k = on; k <= k_off; ++k) m = std::max(m, std::abs(r.leads[l][k]));
    f.r_amplitude[l] = m;
  }

  const auto st_len = static_cast<std::size_t>(std::llround(kStWindowMs / dt));
  const std::size_t st_end = std::min(n - 1, k_off + st_len);
  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
    double s = 0.0;
    for (std::size_t k = k_off; k <= st_end; ++k) s += r.leads[l][k];
    f.st_amplitude[l] = s / static_cast<double>(st_end - k_off + 1);
  }

  const auto rms = rms_series(r);
  std::size_t peak = std::min(n - 1, st_end);
  for (std::size_t k = st_end; k < n; ++k)
    if (rms[k] > rms[peak]) peak = k;
  f.t_peak_ms = static_cast<double>(peak) * dt;
  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) f.t_amplitude[l] = r.leads[l][peak];

  const double t_thr = kTEndThreshold * rms[peak];
  f.t_end_ms = static_cast<double>(n - 1) * dt;
  for (std::size_t k = n - 1; k > peak; --k) {
    if (rms[k - 1] >= t_thr && rms[k] < t_thr) {
      const double frac = (rms[k - 1] - t_thr) / (rms[k - 1] - rms[k]);
      f.t_end_ms = (static_cast<double>(k - 1) + frac) * dt;
      break;
    }
  }
  f.t_end_ms = std::max(f.t_end_ms, f.qrs_offset_ms);
  f.qt_interval_ms = f.t_end_ms - f.qrs_onset_ms;

  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
    f.r_amplitude_mean += f.r_amplitude[l] / ecg::kLeadCount;
    f.st_amplitude_mean += std::abs(f.st_amplitude[l]) / ecg::kLeadCount;
    f.t_amplitude_mean += std::abs(f.t_amplitude[l]) / ecg::kLeadCount;
  }
  return f;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names = {"qrs_duration_ms", "qt_interval_ms", "r_amplitude", "st_amplitude",
                                    "t_amplitude"};
  for (const char* kind : {"r_amplitude_", "st_amplitude_", "t_amplitude_"})
    for (const auto& lead : ecg::kLeadNames) names.push_back(kind + std::string(lead));
  return names;
}

std::vector<double> feature_vector(const PhenotypeFeatures& f) {
  std::vector<double> v = {f.qrs_duration_ms, f.qt_interval_ms, f.r_amplitude_mean, f.st_amplitude_mean,
                           f.t_amplitude_mean};
  v.insert(v.end(), f.r_amplitude.begin(), f.r_amplitude.end());
  v.insert(v.end(), f.st_amplitude.begin(), f.st_amplitude.end());
  v.insert(v.end(), f.t_amplitude.begin(), f.t_amplitude.end());
  return v;
}

bool ZScoreTable::na(std::size_t s, std::size_t f) const { return std::isnan(at(s, f)); }

std::size_t ZScoreTable::column(const std::string& feature) const {
  auto it = std::find(features.begin(), features.end(), feature);
  if (it == features.end()) throw ValidationError("unknown feature '" + feature + "'");
  return static_cast<std::size_t>(it - features.begin());
}

ZScoreTable zscores(const std::vector<PhenotypeFeatures>& scenarios, const std::vector<std::string>& names,
                    const std::vector<PhenotypeFeatures>& healthy) {
  if (scenarios.size() != names.size()) throw ValidationError("one name per scenario is required");
  if (healthy.size() < kMinReplicates)
    throw ValidationError("z-scores need at least " + std::to_string(kMinReplicates) + " healthy replicates, got " +
                          std::to_string(healthy.size()));
  ZScoreTable t;
  t.features = feature_names();
  t.scenarios = names;
  const std::size_t nf = t.features.size();
  std::vector<double> mean(nf, 0.0), sd(nf, 0.0);
  std::vector<std::vector<double>> hv;
  for (const auto& h : healthy) hv.push_back(feature_vector(h));
  for (std::size_t f = 0; f < nf; ++f) {
    for (const auto& v : hv) mean[f] += v[f];
    mean[f] /= static_cast<double>(hv.size());
    double ss = 0.0;
    for (const auto& v : hv) ss += (v[f] - mean[f]) * (v[f] - mean[f]);
    sd[f] = std::sqrt(ss / static_cast<double>(hv.size() - 1));
  }
  t.z.assign(scenarios.size() * nf, kNaN);
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto v = feature_vector(scenarios[s]);
    for (std::size_t f = 0; f < nf; ++f)
      if (sd[f] >= kMinStd && std::isfinite(v[f])) t.z[s * nf + f] = (v[f] - mean[f]) / sd[f];
  }
  return t;
}

double st_abs_z(const ZScoreTable& t, std::size_t row) {
  const std::size_t first = t.column(std::string("st_amplitude_") + std::string(ecg::kLeadNames[0]));
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t l = 0; l < ecg::kLeadCount; ++l) {
    const double z = t.at(row, first + l);
    if (std::isnan(z)) continue;
    sum += std::abs(z);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : kNaN;
}

double qrs_abs_z(const ZScoreTable& t, std::size_t row) { return std::abs(t.at(row, t.column("qrs_duration_ms"))); }

GroupContrast contrast(const ZScoreTable& t, double (*metric)(const ZScoreTable&, std::size_t)) {
  GroupContrast g;
  for (std::size_t s = 0; s < t.scenarios.size(); ++s) {
    const double v = metric(t, s);
    if (std::isnan(v)) continue;
    if (t.scenarios[s].rfind("transmural_", 0) == 0) {
      g.transmural += v;
      ++g.transmural_rows;
    } else if (t.scenarios[s].rfind("subendocardial_", 0) == 0) {
      g.subendocardial += v;
      ++g.subendocardial_rows;
    }
  }
  g.transmural = g.transmural_rows ? g.transmural / static_cast<double>(g.transmural_rows) : kNaN;
  g.subendocardial = g.subendocardial_rows ? g.subendocardial / static_cast<double>(g.subendocardial_rows) : kNaN;
  return g;
}

std::string heatmap_svg(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::vector<double>& values, bool diverging) {
  constexpr int cell = 22, left = 190, top = 150;
  double hi = 0.0;
  for (double v : values)
    if (std::isfinite(v)) hi = std::max(hi, std::abs(v));
  if (hi == 0.0) hi = 1.0;
  const int width = left + cell * static_cast<int>(cols.size()) + 20;
  const int height = top + cell * static_cast<int>(rows.size()) + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<text x=\"10\" y=\"16\" font-size=\"13\">" << title << " (|max| = " << fmt(hi) << ")</text>\n";
  for (std::size_t j = 0; j < cols.size(); ++j)
    os << "<text transform=\"translate(" << left + cell * j + cell / 2 << "," << top - 4
       << ") rotate(-60)\">" << cols[j] << "</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "<text x=\"" << left - 4 << "\" y=\"" << top + cell * i + cell / 2 + 3 << "\" text-anchor=\"end\">"
       << rows[i] << "</text>\n";
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = values[i * cols.size() + j];
      int r = 200, g = 200, b = 200;
      if (std::isfinite(v)) {
        const double x = std::clamp(v / hi, -1.0, 1.0);
        if (diverging) {
          const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(x))));
          r = x >= 0 ? 255 : fade;
          b = x >= 0 ? fade : 255;
          g = fade;
        } else {
          const int fade = static_cast<int>(std::lround(255.0 * (1.0 - x)));
          r = 255;
          g = fade;
          b = fade;
        }
      }
      os << "<rect x=\"" << left + cell * j << "\" y=\"" << top + cell * i << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"><title>" << rows[i]
         << " / " << cols[j] << ": " << fmt(v) << "</title></rect>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

CohortAnalysis analyze_cohort(const std::filesystem::path& cohort_dir, const std::filesystem::path& out_dir,
                              unsigned jobs) {
  const auto rows = cohort::read_manifest(cohort_dir / cohort::kManifestName);
  std::vector<cohort::ManifestRow> reps;
  if (std::filesystem::exists(cohort_dir / cohort::kReplicateManifestName))
    reps = cohort::read_manifest(cohort_dir / cohort::kReplicateManifestName);

  std::vector<std::string> mesh_ids, names;
  for (const auto& r : rows) {
    if (std::find(mesh_ids.begin(), mesh_ids.end(), r.mesh_id) == mesh_ids.end()) mesh_ids.push_back(r.mesh_id);
    if (std::find(names.begin(), names.end(), r.scenario) == names.end()) names.push_back(r.scenario);
  }
  if (names.empty()) throw ValidationError("cohort manifest lists no scenarios");
  const std::size_t ns = names.size();
  const auto fnames = feature_names();
  const std::size_t nf = fnames.size();

  std::filesystem::create_directories(out_dir);
  std::ofstream features_csv(out_dir / "features.csv");
  features_csv << "mesh_id,scenario,kind";
  for (const auto& f : fnames) features_csv << ',' << f;
  features_csv << '\n';
  auto write_features = [&](const std::string& mesh, const std::string& name, const char* kind,
                            const std::vector<double>& v) {
    features_csv << mesh << ',' << name << ',' << kind;
    for (double x : v) features_csv << ',' << fmt(x);
    features_csv << '\n';
  };

  Accumulator dmax(ns * ns), davg(ns * ns), zacc(ns * nf);
  std::string z_error;
  CohortAnalysis out;
  for (const auto& mesh : mesh_ids) {
    std::vector<ecg::EcgRecord> records;
    std::vector<std::string> present;
    for (const auto& r : rows) {
      if (r.mesh_id != mesh) continue;
      if (r.status.rfind("ok", 0) != 0) {
        log::warn("skipping failed run " + r.file);
        continue;
      }
      records.push_back(record_from_sample(cohort::read_sample(cohort_dir / r.file)));
      present.push_back(r.scenario);
    }
    if (records.empty()) continue;
    ++out.meshes;
    std::vector<std::size_t> idx;
    for (const auto& p : present)
      idx.push_back(static_cast<std::size_t>(std::find(names.begin(), names.end(), p) - names.begin()));

    const auto m = dtw_matrix(records, present, jobs);
    for (std::size_t i = 0; i < present.size(); ++i)
      for (std::size_t j = 0; j < present.size(); ++j) {
        dmax.add(idx[i] * ns + idx[j], m.max_at(i, j));
        davg.add(idx[i] * ns + idx[j], m.avg_at(i, j));
      }

    std::vector<PhenotypeFeatures> feats(records.size());
    std::vector<std::string> feat_names;
    std::vector<PhenotypeFeatures> ok_feats;
    std::vector<std::size_t> ok_idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
      try {
        feats[i] = extract_features(records[i]);
        ok_feats.push_back(feats[i]);
        feat_names.push_back(present[i]);
        ok_idx.push_back(idx[i]);
        write_features(mesh, present[i], "scenario", feature_vector(feats[i]));
      } catch (const FeatureError& e) {
        log::warn(mesh + "/" + present[i] + ": " + e.what());
        write_features(mesh, present[i], "scenario", std::vector<double>(nf, kNaN));
      }
    }
    std::vector<PhenotypeFeatures> healthy;
    for (const auto& r : reps) {
      if (r.mesh_id != mesh || r.status.rfind("ok", 0) != 0) continue;
      try {
        healthy.push_back(extract_features(ecg::read_ctecg(cohort_dir / r.file)));
        write_features(mesh, std::filesystem::path(r.file).stem().string(), "replicate",
                       feature_vector(healthy.back()));
      } catch (const FeatureError& e) {
        log::warn(r.file + ": " + e.what());
      }
    }
    try {
      const auto z = zscores(ok_feats, feat_names, healthy);
      for (std::size_t i = 0; i < ok_idx.size(); ++i)
        for (std::size_t f = 0; f < nf; ++f) zacc.add(ok_idx[i] * nf + f, z.at(i, f));
    } catch (const ValidationError& e) {
      z_error = mesh + ": " + e.what();
      log::warn(z_error);
    }
  }
  features_csv.close();

  out.dtw.names = names;
  out.dtw.max.resize(ns * ns);
  out.dtw.avg.resize(ns * ns);
  for (std::size_t i = 0; i < ns * ns; ++i) {
    out.dtw.max[i] = dmax.mean(i);
    out.dtw.avg[i] = davg.mean(i);
  }
  out.z.features = fnames;
  out.z.scenarios = names;
  out.z.z.resize(ns * nf);
  for (std::size_t i = 0; i < ns * nf; ++i) out.z.z[i] = zacc.mean(i);
  out.st = contrast(out.z, st_abs_z);
  out.qrs = contrast(out.z, qrs_abs_z);

  write_matrix_csv(out_dir / "dtw_max.csv", names, out.dtw.max);
  write_matrix_csv(out_dir / "dtw_avg.csv", names, out.dtw.avg);
  {
    std::ofstream os(out_dir / "zscores.csv");
    os << "scenario";
    for (const auto& f : fnames) os << ',' << f;
    os << '\n';
    for (std::size_t s = 0; s < ns; ++s) {
      os << names[s];
      for (std::size_t f = 0; f < nf; ++f) os << ',' << fmt(out.z.at(s, f));
      os << '\n';
    }
  }
  std::ofstream(out_dir / "dtw_max.svg") << heatmap_svg("DTW, max over leads", names, names, out.dtw.max, false);
  std::ofstream(out_dir / "dtw_avg.svg") << heatmap_svg("DTW, mean over leads", names, names, out.dtw.avg, false);
  std::ofstream(out_dir / "zscores.svg") << heatmap_svg("Phenotype z-scores vs healthy", names, fnames, out.z.z,
                                                        true);

  nlohmann::ordered_json j;
  j["meshes"] = out.meshes;
  j["scenarios"] = names;
  j["dtw_input"] = "normalized leads (per-record global max-abs), so magnitudes are not comparable to raw mV";
  j["dtw_step_pattern"] = "symmetric1, absolute-difference cost, no window";
  j["zscore_std"] = "sample standard deviation of healthy replicates; NA when below 1e-12";
  auto group = [](const GroupContrast& g) {
    nlohmann::ordered_json o;
    o["transmural_mean_abs_z"] = std::isnan(g.transmural) ? nlohmann::ordered_json() : nlohmann::ordered_json(g.transmural);
    o["subendocardial_mean_abs_z"] = std::isnan(g.subendocardial) ? nlohmann::ordered_json() : nlohmann::ordered_json(g.subendocardial);
    o["transmural_rows"] = g.transmural_rows;
    o["subendocardial_rows"] = g.subendocardial_rows;
    return o;
  };
  j["st_amplitude_per_lead"] = group(out.st);
  j["qrs_duration"] = group(out.qrs);
  if (!z_error.empty()) j["zscore_error"] = z_error;
  std::ofstream(out_dir / "analysis.json") << j.dump(2) << '\n';
  return out;
}

}  // namespace cardiotwin::analysis
