// cardiotwin: command-line front end for the forward pipeline.
//
// Exit codes: 0 success, 1 stage failure, 2 bad usage or invalid parameters.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cardiotwin/analysis.hpp"
#include "cardiotwin/cohort.hpp"
#include "cardiotwin/config.hpp"
#include "cardiotwin/ecg.hpp"
#include "cardiotwin/errors.hpp"
#include "cardiotwin/log.hpp"
#include "cardiotwin/parallel.hpp"
#include "cardiotwin/pipeline.hpp"
#include "cardiotwin/reaction.hpp"

namespace ct = cardiotwin;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_model_options(CLI::App& app, ct::RunConfig& c) {
  const char* g = "Model parameters";
  app.add_option("--edge", c.edge, "target mean edge length (cm)")->group(g);
  app.add_option("--lv-endo-radius", c.wall.lv_endo_radius)->group(g);
  app.add_option("--lv-endo-half-length", c.wall.lv_endo_half_length)->group(g);
  app.add_option("--lv-wall", c.wall.lv_wall)->group(g);
  app.add_option("--rv-endo-radius-x", c.wall.rv_endo_radius_x)->group(g);
  app.add_option("--rv-endo-radius-y", c.wall.rv_endo_radius_y)->group(g);
  app.add_option("--rv-endo-half-length", c.wall.rv_endo_half_length)->group(g);
  app.add_option("--rv-offset", c.wall.rv_offset)->group(g);
  app.add_option("--rv-wall", c.wall.rv_wall)->group(g);
  app.add_option("--alpha-endo", c.alpha_endo, "fibre helix angle at the endocardium (deg)")->group(g);
  app.add_option("--alpha-epi", c.alpha_epi, "fibre helix angle at the epicardium (deg)")->group(g);
  app.add_option("--precordial-angles", c.electrodes.precordial_angles_deg, "six V1..V6 angles (deg)")->group(g);
  app.add_option("--chest-margin", c.electrodes.chest_margin)->group(g);
  app.add_option("--precordial-depth", c.electrodes.precordial_depth)->group(g);
  app.add_option("--torso-scale", c.electrodes.torso_scale)->group(g);
  app.add_option("--min-clearance", c.electrodes.min_clearance)->group(g);
  app.add_option("--sigma", c.sigma, "noise correlation length (cm)")->group(g);
  app.add_option("--bz-radius", c.bz_radius, "border-zone radius (cm)")->group(g);
  app.add_option("--catalog", c.catalog_path, "JSON scenario overrides")->group(g);
  app.add_option("--v-fiber", c.conduction.v_fiber, "cm/s")->group(g);
  app.add_option("--v-sheet", c.conduction.v_sheet, "cm/s")->group(g);
  app.add_option("--v-normal", c.conduction.v_normal, "cm/s")->group(g);
  app.add_option("--scar-scale", c.conduction.scar_scale)->group(g);
  app.add_option("--bz-scale", c.conduction.bz_scale)->group(g);
  app.add_option("--eikonal-tol", c.eikonal_tol_ms, "ms")->group(g);
  app.add_option("--tau-in", c.reaction.tau_in)->group(g);
  app.add_option("--tau-out", c.reaction.tau_out)->group(g);
  app.add_option("--tau-open", c.reaction.tau_open)->group(g);
  app.add_option("--u-gate", c.reaction.u_gate)->group(g);
  app.add_option("--t-foot", c.reaction.t_foot, "ms")->group(g);
  app.add_option("--i-foot", c.reaction.i_foot_amp)->group(g);
  app.add_option("--dt", c.reaction.dt, "ms")->group(g);
  app.add_option("--t-end", c.reaction.t_end, "ms")->group(g);
  app.add_option("--g-ab", c.apd.g_ab)->group(g);
  app.add_option("--g-tm", c.apd.g_tm)->group(g);
  app.add_option("--apd-min", c.apd.apd_min, "ms")->group(g);
  app.add_option("--apd-max", c.apd.apd_max, "ms")->group(g);
  app.add_option("--bz-apd-factor", c.apd.bz_apd_factor)->group(g);
  app.add_option("--record-period", c.record_period_ms, "ms between stored voltage samples")->group(g);
  app.add_option("--sample-nodes", c.sample_nodes, "nodes per exported sample")->group(g);
  app.add_option("--ecg-samples", c.ecg_samples, "samples per exported ECG")->group(g);
  app.add_option("--healthy-replicates", c.healthy_replicates)->group(g);
  app.add_option("--root-jitter", c.root_jitter_ms, "ms, healthy-replicate root jitter")->group(g);
}

const ct::infarct::Scenario& lookup(const std::vector<ct::infarct::Scenario>& catalog, const std::string& name) {
  for (const auto& s : catalog)
    if (s.name == name) return s;
  std::string known;
  for (const auto& s : catalog) known += " " + s.name;
  throw UsageError("unknown scenario '" + name + "'; known:" + known);
}

ct::MeshFile with_config(ct::MeshFile file, const ct::RunConfig& c) {
  file.set_text(ct::pipeline::kFieldConfig, c.to_json());
  return file;
}

// Keeps every field already in the file and adds missing annotations.
ct::MeshFile annotated_file(const ct::MeshFile& in, const ct::pipeline::Annotated& a) {
  ct::MeshFile out = ct::pipeline::to_file(a);
  for (const auto& [name, field] : in.fields)
    if (!out.has(name)) out.fields[name] = field;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  ct::RunConfig config;
  unsigned jobs = ct::default_jobs();
  std::string log_level = "info";

  CLI::App app{"Cardiac digital-twin forward simulator: infarct synthesis, reaction-Eikonal activation, "
               "pseudo-ECG and cohort export"};
  app.set_version_flag("--version", std::string(CARDIOTWIN_VERSION) + " (" + CARDIOTWIN_BUILD_HASH + ")");
  app.set_config("--config", "", "key = value configuration file; flags override it");
  app.add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level)->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));
  add_model_options(app, config);
  app.require_subcommand(1);
  app.fallthrough();

  auto* mesh_gen = app.add_subcommand("mesh-gen", "generate and annotate the idealized biventricle");
  std::string mesh_out;
  mesh_gen->add_option("--seed", config.mesh_seed, "lattice offset seed");
  mesh_gen->add_option("--out", mesh_out, "output .ctmesh")->required();

  auto* scar_gen = app.add_subcommand("scar-gen", "synthesize scar and border zone for one scenario");
  std::string scar_mesh, scar_scenario, scar_out;
  std::uint64_t scar_seed = 0;
  scar_gen->add_option("--mesh", scar_mesh)->required()->check(CLI::ExistingFile);
  scar_gen->add_option("--scenario", scar_scenario)->required();
  scar_gen->add_option("--seed", scar_seed, "noise seed")->required();
  scar_gen->add_option("--out", scar_out)->required();

  auto* activate = app.add_subcommand("activate", "solve the anisotropic Eikonal activation map");
  std::string act_mesh, act_out;
  activate->add_option("--mesh", act_mesh)->required()->check(CLI::ExistingFile);
  activate->add_option("--out", act_out)->required();

  auto* simulate = app.add_subcommand("simulate", "reaction step and pseudo-ECG");
  std::string sim_mesh, sim_volt, sim_ecg;
  bool sim_raw = false;
  simulate->add_option("--mesh", sim_mesh)->required()->check(CLI::ExistingFile);
  simulate->add_option("--dump-voltages", sim_volt, "write node traces (.ctvolt)");
  simulate->add_option("--ecg-out", sim_ecg, "write the 8-lead record (.ctecg)");
  simulate->add_flag("--raw", sim_raw, "skip resampling and normalisation of the ECG");

  auto* cohort = app.add_subcommand("cohort", "run every scenario on every mesh and export samples");
  std::string mesh_dir, cohort_out;
  std::uint64_t cohort_seed = 0;
  cohort->add_option("--mesh-dir", mesh_dir)->required()->check(CLI::ExistingDirectory);
  cohort->add_option("--out", cohort_out)->required();
  cohort->add_option("--seed", cohort_seed)->required();

  auto* analyze = app.add_subcommand("analyze", "DTW dissimilarity and phenotype z-scores of a cohort");
  std::string an_cohort, an_out;
  analyze->add_option("--cohort", an_cohort)->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--out", an_out)->required();

  auto* validate = app.add_subcommand("validate", "re-check a cohort directory or a single output file");
  std::string val_path;
  validate->add_option("path", val_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ct::log::set_level(log_level == "debug"  ? ct::log::Level::debug
                     : log_level == "info" ? ct::log::Level::info
                     : log_level == "warn" ? ct::log::Level::warn
                     : log_level == "error" ? ct::log::Level::error
                                            : ct::log::Level::off);

  try {
    config.validate();

    if (*mesh_gen) {
      auto a = ct::pipeline::build_biventricle(config);
      ct::write_ctmesh(mesh_out, with_config(ct::pipeline::to_file(a), config));
      std::printf("%s: %zu nodes, %zu tets, mean edge %.4f cm\n", mesh_out.c_str(), a.mesh.nodes.size(),
                  a.mesh.tets.size(), ct::mean_edge_length(a.mesh));
    } else if (*scar_gen) {
      const auto catalog = ct::load_catalog(config);
      const auto& sc = lookup(catalog, scar_scenario);
      const auto in = ct::read_ctmesh(scar_mesh);
      const auto a = ct::pipeline::from_file(in, config);
      auto out = annotated_file(in, a);
      ct::infarct::TissueMap tissue = ct::infarct::TissueMap::healthy(a.mesh.nodes.size());
      if (!sc.healthy) {
        auto params = sc.params;
        params.seed = scar_seed;
        const auto noise = ct::infarct::correlated_noise_field(a.mesh, params.sigma, scar_seed, jobs);
        const auto scar = ct::infarct::synthesize_scar(noise, a.coords, params);
        tissue = ct::infarct::grow_border_zone(a.mesh, scar, params.bz_radius);
        out.set_node_field(ct::pipeline::kFieldNoise, noise);
      }
      ct::pipeline::store_tissue(out, tissue);
      out.fields.erase(ct::pipeline::kFieldActivation);
      out.fields.erase(ct::pipeline::kFieldRoots);
      out.set_text(ct::pipeline::kFieldScenario, sc.name);
      ct::write_ctmesh(scar_out, with_config(std::move(out), config));
      std::printf("%s: %s seed %llu, scar %zu nodes, border zone %zu nodes\n", scar_out.c_str(), sc.name.c_str(),
                  static_cast<unsigned long long>(scar_seed), tissue.count(ct::infarct::Tissue::scar),
                  tissue.count(ct::infarct::Tissue::bz));
    } else if (*activate) {
      const auto in = ct::read_ctmesh(act_mesh);
      const auto a = ct::pipeline::from_file(in, config);
      const auto tissue = ct::pipeline::load_tissue(in);
      const auto tensors = ct::activation::build_velocity_tensor(a.mesh, a.fibers, tissue, config.conduction);
      const auto roots = ct::activation::default_root_set(a.coords);
      ct::activation::EikonalOptions opt;
      opt.tol_ms = config.eikonal_tol_ms;
      const auto map = ct::activation::solve_eikonal(a.mesh, tensors, roots, opt);
      auto out = annotated_file(in, a);
      ct::pipeline::store_activation(out, map, roots);
      ct::write_ctmesh(act_out, with_config(std::move(out), config));
      const double latest = *std::max_element(map.t_ms.begin(), map.t_ms.end());
      std::printf("%s: total activation %.2f ms, %zu unreached nodes\n", act_out.c_str(), latest, map.unreached);
    } else if (*simulate) {
      const auto in = ct::read_ctmesh(sim_mesh);
      if (!in.has(ct::pipeline::kFieldActivation))
        throw UsageError(sim_mesh + " carries no activation map; run `activate` first");
      const auto a = ct::pipeline::from_file(in, config);
      const auto tissue = ct::pipeline::load_tissue(in);
      const auto act = ct::pipeline::load_activation(in);
      const auto apd = ct::reaction::apd_field(a.coords, tissue, config.apd);
      const ct::reaction::MsCalibration cal(config.reaction);
      const auto traces = ct::reaction::simulate_transmembrane(act, apd, cal, config.record_every(), jobs);
      if (!sim_volt.empty()) {
        ct::reaction::write_ctvolt(sim_volt, traces);
        Json side;
        side["sample_period_ms"] = traces.sample_period;
        side["config"] = Json::parse(config.to_json());
        std::ofstream(sim_volt + ".json") << side.dump(2) << "\n";
        std::printf("%s: %zu nodes x %zu samples\n", sim_volt.c_str(), traces.nodes, traces.samples);
      }
      auto record = ct::ecg::derive_leads(ct::ecg::electrode_potentials(a.mesh, traces, a.electrodes));
      if (in.has(ct::pipeline::kFieldScenario)) record.scenario = in.text(ct::pipeline::kFieldScenario);
      if (!sim_raw) record = ct::ecg::normalize_and_resample(record, config.ecg_samples);
      Json meta;
      meta["source"] = fs::path(sim_mesh).filename().string();
      meta["ecg_normalization"] = sim_raw ? "none" : "global_max_abs";
      meta["config"] = Json::parse(config.to_json());
      record.metadata = meta.dump();
      if (!sim_ecg.empty()) {
        ct::ecg::write_ctecg(sim_ecg, record);
        std::printf("%s: %zu samples at %.4f ms\n", sim_ecg.c_str(), record.samples(), record.sample_period);
      }
    } else if (*cohort) {
      std::vector<fs::path> meshes;
      for (const auto& e : fs::directory_iterator(mesh_dir))
        if (e.is_regular_file() && e.path().extension() == ".ctmesh") meshes.push_back(e.path());
      if (meshes.empty()) throw UsageError("no .ctmesh files in " + mesh_dir);
      const auto report = ct::cohort::generate_cohort(meshes, cohort_out, cohort_seed, config, jobs);
      std::printf("%s: %zu samples from %zu meshes, %zu failed runs\n", cohort_out.c_str(), report.samples,
                  meshes.size(), report.failures);
      if (report.failures) return 1;
    } else if (*analyze) {
      const auto r = ct::analysis::analyze_cohort(an_cohort, an_out, jobs);
      Json cfg = Json::parse(config.to_json());
      std::ofstream(fs::path(an_out) / "config.json") << cfg.dump(2) << "\n";
      std::printf("%s: %zu scenarios over %zu meshes; mean |z| ST transmural %.3f vs subendocardial %.3f, "
                  "QRS %.3f vs %.3f\n",
                  an_out.c_str(), r.dtw.size(), r.meshes, r.st.transmural, r.st.subendocardial, r.qrs.transmural,
                  r.qrs.subendocardial);
    } else if (*validate) {
      const auto report = ct::cohort::validate_path(val_path, config.sample_nodes, config.ecg_samples);
      for (const auto& p : report.problems) std::fprintf(stderr, "problem: %s\n", p.c_str());
      std::printf("%s: %zu items checked, %zu problems\n", val_path.c_str(), report.checked, report.problems.size());
      return report.ok() ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ct::ParameterError& e) {
    std::fprintf(stderr, "invalid parameter: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
