#include "cardiotwin/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"
#include "cardiotwin/mesh_io.hpp"
#include "cardiotwin/parallel.hpp"
#include "cardiotwin/random.hpp"

namespace cardiotwin::cohort {

using Json = nlohmann::ordered_json;

std::vector<std::uint32_t> subsample_nodes(const Mesh& mesh, std::size_t count, std::uint64_t seed) {
  const std::size_t n = mesh.nodes.size();
  if (count == 0) throw ValidationError("subsample count must be positive");
  if (n < count) {
    std::ostringstream ss;
    ss << "mesh has " << n << " nodes, fewer than the " << count << " requested";
    throw ValidationError(ss.str());
  }
  std::vector<std::uint32_t> picked;
  picked.reserve(count);
  if (count == n) {
    for (std::uint32_t i = 0; i < n; ++i) picked.push_back(i);
    return picked;
  }
  Rng rng(derive_seed(seed, 0x667073));
  auto current = static_cast<std::uint32_t>(rng.index(n));
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < count; ++k) {
    picked.push_back(current);
    const Vec3 p = mesh.nodes[current];
    double best = -1.0;
    std::uint32_t next = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      double d = (mesh.nodes[i] - p).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
    current = next;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

PreparedMesh prepare_mesh(std::string id, pipeline::Annotated annotated, const RunConfig& config,
                          std::uint64_t sampling_seed) {
  PreparedMesh p;
  p.id = std::move(id);
  p.lead_field = ecg::lead_field(annotated.mesh, annotated.electrodes);
  p.sample_nodes = subsample_nodes(annotated.mesh, config.sample_nodes, sampling_seed);
  p.annotated = std::move(annotated);
  return p;
}

namespace {

std::size_t location_index(const infarct::Scenario& s) {
  return s.healthy ? infarct::kLocationCount : static_cast<std::size_t>(s.location);
}

std::uint64_t mesh_stream(std::uint64_t cohort_seed, std::size_t mesh_index) {
  return derive_seed(cohort_seed, 0x6d00 + mesh_index);
}

CohortSample assemble(const PreparedMesh& prepared, const ScenarioResult& r) {
  const auto& a = prepared.annotated;
  CohortSample s;
  s.nodes = prepared.sample_nodes.size();
  s.samples = r.record.samples();
  s.x.reserve(s.nodes * kXColumns);
  s.y.reserve(s.nodes);
  for (auto i : prepared.sample_nodes) {
    const Vec3& p = a.mesh.nodes[i];
    for (double v : {p.x(), p.y(), p.z(), a.coords.tm[i], a.coords.ab[i], a.coords.rt[i],
                     static_cast<double>(a.coords.tv[i])})
      s.x.push_back(static_cast<float>(v));
    s.y.push_back(static_cast<std::uint8_t>(r.tissue.labels[i]));
  }
  s.s.reserve(s.samples * ecg::kLeadCount);
  for (std::size_t k = 0; k < s.samples; ++k)
    for (std::size_t l = 0; l < ecg::kLeadCount; ++l) s.s.push_back(static_cast<float>(r.record.leads[l][k]));
  return s;
}

std::string sample_metadata(const PreparedMesh& prepared, const infarct::Scenario& scenario, std::uint64_t seed,
                            const RunConfig& config, const ScenarioResult& r) {
  Json j;
  j["format"] = "CTSAMP1";
  j["version"] = CARDIOTWIN_VERSION;
  j["V"] = prepared.sample_nodes.size();
  j["T"] = r.record.samples();
  j["leads"] = std::vector<std::string>(ecg::kLeadNames.begin(), ecg::kLeadNames.end());
  j["x_columns"] = {"x_cm", "y_cm", "z_cm", "tm", "ab", "rt", "tv"};
  j["labels"] = {"normal", "scar", "bz"};
  j["mesh_id"] = prepared.id;
  j["scenario"] = scenario.name;
  j["transmurality"] = std::string(infarct::transmurality_name(scenario.transmurality));
  j["location"] = scenario.healthy ? "none" : std::string(infarct::location_name(scenario.location));
  j["seed"] = seed;
  j["subsampling"] = "farthest_point";
  j["ecg_normalization"] = "global_max_abs";
  j["ecg_scale"] = r.record.scale;
  j["ecg_sample_period_ms"] = r.record.sample_period;
  j["scar_nodes"] = r.tissue.count(infarct::Tissue::scar);
  j["bz_nodes"] = r.tissue.count(infarct::Tissue::bz);
  j["degenerate"] = r.tissue.degenerate;
  j["config"] = Json::parse(config.to_json());
  return j.dump();
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  return s;
}

}  // namespace

std::uint64_t scenario_seed(std::uint64_t cohort_seed, std::size_t mesh_index, const infarct::Scenario& scenario) {
  return derive_seed(mesh_stream(cohort_seed, mesh_index), location_index(scenario));
}

std::uint64_t replicate_seed(std::uint64_t cohort_seed, std::size_t mesh_index, std::size_t replicate) {
  return derive_seed(mesh_stream(cohort_seed, mesh_index), 0x100 + replicate);
}

std::string split_for(std::size_t mesh_index, std::size_t mesh_count) {
  const double pos = (static_cast<double>(mesh_index) + 0.5) / static_cast<double>(std::max<std::size_t>(mesh_count, 1));
  if (pos < 0.70) return "train";
  if (pos < 0.85) return "val";
  return "test";
}

ScenarioResult run_scenario(const PreparedMesh& prepared, const infarct::Scenario& scenario, std::uint64_t seed,
                            const RunConfig& config, const reaction::MsCalibration& calibration,
                            const RunOptions& options) {
  const auto& a = prepared.annotated;
  const Mesh& mesh = a.mesh;
  try {
    ScenarioResult r;
    if (scenario.healthy) {
      r.tissue = infarct::TissueMap::healthy(mesh.nodes.size());
    } else {
      infarct::ScarParams params = scenario.params;
      params.seed = seed;
      std::vector<double> local;
      const std::vector<double>* noise = options.noise;
      if (!noise) {
        local = infarct::correlated_noise_field(mesh, params.sigma, seed, options.jobs);
        noise = &local;
      }
      auto scar = infarct::synthesize_scar(*noise, a.coords, params);
      r.tissue = infarct::grow_border_zone(mesh, scar, params.bz_radius);
      r.tissue.degenerate = scar.degenerate;
    }

    const auto tensors = activation::build_velocity_tensor(mesh, a.fibers, r.tissue, config.conduction);
    r.roots = activation::default_root_set(a.coords);
    if (options.root_jitter_seed != 0) {
      Rng rng(derive_seed(options.root_jitter_seed, 0x6a6974));
      std::vector<double> j(r.roots.size());
      for (auto& v : j) v = rng.uniform(-config.root_jitter_ms, config.root_jitter_ms);
      const double lo = *std::min_element(j.begin(), j.end());
      for (std::size_t i = 0; i < r.roots.size(); ++i) r.roots[i].t_ms = j[i] - lo;
    }
    activation::EikonalOptions eik;
    eik.tol_ms = config.eikonal_tol_ms;
    r.activation = activation::solve_eikonal(mesh, tensors, r.roots, eik);
    r.apd = reaction::apd_field(a.coords, r.tissue, config.apd);
    const auto traces =
        reaction::simulate_transmembrane(r.activation, r.apd, calibration, config.record_every(), options.jobs);
    auto raw = ecg::derive_leads(ecg::electrode_potentials(prepared.lead_field, traces));
    raw.scenario = scenario.name;
    raw.seed = seed;
    r.record = ecg::normalize_and_resample(raw, config.ecg_samples);
    r.sample = assemble(prepared, r);
    r.sample.metadata = sample_metadata(prepared, scenario, seed, config, r);
    r.record.metadata = r.sample.metadata;
    return r;
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario " + scenario.name + ": " + e.what());
  }
}

CohortReport generate_cohort(const std::vector<std::pair<std::string, pipeline::Annotated>>& meshes,
                             const std::filesystem::path& out_dir, std::uint64_t seed, const RunConfig& config,
                             unsigned jobs) {
  config.validate();
  if (meshes.empty()) throw ValidationError("cohort needs at least one mesh");
  {
    std::map<std::string, int> ids;
    for (const auto& [id, _] : meshes)
      if (ids[id]++) throw ValidationError("duplicate mesh id '" + id + "'");
  }
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "config.json");
    os << Json::parse(config.to_json()).dump(2) << "\n";
  }

  const auto catalog = load_catalog(config);
  const reaction::MsCalibration calibration(config.reaction);
  infarct::Scenario healthy;
  for (const auto& s : catalog)
    if (s.healthy) healthy = s;

  CohortReport report;
  std::vector<ManifestRow> replicate_rows;
  for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
    const auto& [id, annotated] = meshes[mi];
    log::info("preparing mesh " + id);
    const PreparedMesh prepared =
        prepare_mesh(id, annotated, config, derive_seed(mesh_stream(seed, mi), 0x200));
    const std::string split = split_for(mi, meshes.size());
    std::filesystem::create_directories(out_dir / id / "healthy_replicates");

    // One noise field per location, shared by both transmurality variants.
    std::vector<std::vector<double>> noise(infarct::kLocationCount);
    parallel_for(infarct::kLocationCount, jobs, [&](std::size_t loc) {
      for (const auto& s : catalog)
        if (!s.healthy && location_index(s) == loc) {
          noise[loc] = infarct::correlated_noise_field(prepared.annotated.mesh, s.params.sigma,
                                                       scenario_seed(seed, mi, s));
          return;
        }
    });

    const std::size_t tasks = catalog.size() + config.healthy_replicates;
    std::vector<ManifestRow> rows(tasks);
    parallel_for(tasks, jobs, [&](std::size_t t) {
      ManifestRow& row = rows[t];
      row.mesh_id = id;
      row.split = split;
      const bool replicate = t >= catalog.size();
      const infarct::Scenario& sc = replicate ? healthy : catalog[t];
      const std::size_t rep = replicate ? t - catalog.size() : 0;
      row.scenario = replicate ? "healthy" : sc.name;
      row.transmurality = std::string(infarct::transmurality_name(sc.transmurality));
      row.seed = replicate ? replicate_seed(seed, mi, rep) : scenario_seed(seed, mi, sc);
      char name[64];
      std::snprintf(name, sizeof name, "rep_%02zu.ctecg", rep);
      row.file = replicate ? (std::filesystem::path(id) / "healthy_replicates" / name).generic_string()
                           : (std::filesystem::path(id) / (sc.name + ".ctsamp")).generic_string();
      try {
        RunOptions opt;
        if (!sc.healthy) opt.noise = &noise[location_index(sc)];
        if (replicate) opt.root_jitter_seed = row.seed;
        auto result = run_scenario(prepared, sc, row.seed, config, calibration, opt);
        if (replicate)
          ecg::write_ctecg(out_dir / row.file, result.record);
        else
          write_sample(out_dir / row.file, result.sample);
        row.sha256 = sha256_file(out_dir / row.file);
        row.status = result.tissue.degenerate ? "ok degenerate" : "ok";
      } catch (const std::exception& e) {
        row.status = "failed: " + sanitize(e.what());
        log::error(row.file + ": " + e.what());
      }
    });

    for (std::size_t t = 0; t < tasks; ++t) {
      if (t < catalog.size()) {
        report.rows.push_back(rows[t]);
        ++report.samples;
      } else {
        replicate_rows.push_back(rows[t]);
      }
      if (rows[t].status.rfind("failed", 0) == 0) ++report.failures;
    }
  }
  write_manifest(out_dir / kManifestName, report.rows);
  write_manifest(out_dir / kReplicateManifestName, replicate_rows);
  return report;
}

CohortReport generate_cohort(const std::vector<std::filesystem::path>& mesh_files,
                             const std::filesystem::path& out_dir, std::uint64_t seed, const RunConfig& config,
                             unsigned jobs) {
  std::vector<std::filesystem::path> sorted = mesh_files;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<std::string, pipeline::Annotated>> meshes;
  for (const auto& p : sorted) meshes.emplace_back(p.stem().string(), pipeline::from_file(read_ctmesh(p), config));
  return generate_cohort(meshes, out_dir, seed, config, jobs);
}

}  // namespace cardiotwin::cohort
