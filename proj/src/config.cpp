#include "cardiotwin/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cardiotwin/errors.hpp"

namespace cardiotwin {

using Json = nlohmann::ordered_json;

void RunConfig::validate() const {
  wall.validate(edge);
  conduction.validate();
  reaction.validate();
  apd.validate();
  if (!(sigma > 0.0)) throw ParameterError("config: sigma must be positive");
  if (!(bz_radius >= 0.0)) throw ParameterError("config: bz_radius must be non-negative");
  if (!(eikonal_tol_ms > 0.0)) throw ParameterError("config: eikonal_tol_ms must be positive");
  if (!(record_period_ms >= reaction.dt)) throw ParameterError("config: record_period_ms must be at least dt");
  double ratio = record_period_ms / reaction.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw ParameterError("config: record_period_ms must be a multiple of dt");
  if (sample_nodes == 0) throw ParameterError("config: sample_nodes must be positive");
  if (ecg_samples < 2) throw ParameterError("config: ecg_samples must be at least 2");
  if (!(root_jitter_ms >= 0.0)) throw ParameterError("config: root_jitter_ms must be non-negative");
}

std::size_t RunConfig::record_every() const {
  return static_cast<std::size_t>(std::llround(record_period_ms / reaction.dt));
}

std::string RunConfig::to_json() const {
  Json j;
  j["edge"] = edge;
  j["mesh_seed"] = mesh_seed;
  j["wall"] = {{"lv_endo_radius", wall.lv_endo_radius},
               {"lv_endo_half_length", wall.lv_endo_half_length},
               {"lv_wall", wall.lv_wall},
               {"rv_endo_radius_x", wall.rv_endo_radius_x},
               {"rv_endo_radius_y", wall.rv_endo_radius_y},
               {"rv_endo_half_length", wall.rv_endo_half_length},
               {"rv_offset", wall.rv_offset},
               {"rv_wall", wall.rv_wall}};
  j["alpha_endo"] = alpha_endo;
  j["alpha_epi"] = alpha_epi;
  j["electrodes"] = {{"precordial_angles_deg", electrodes.precordial_angles_deg},
                     {"chest_margin", electrodes.chest_margin},
                     {"precordial_depth", electrodes.precordial_depth},
                     {"torso_scale", electrodes.torso_scale},
                     {"min_clearance", electrodes.min_clearance}};
  j["sigma"] = sigma;
  j["bz_radius"] = bz_radius;
  j["catalog_path"] = catalog_path;
  j["conduction"] = {{"v_fiber", conduction.v_fiber},       {"v_sheet", conduction.v_sheet},
                     {"v_normal", conduction.v_normal},     {"scar_scale", conduction.scar_scale},
                     {"bz_scale", conduction.bz_scale}};
  j["eikonal_tol_ms"] = eikonal_tol_ms;
  j["reaction"] = {{"c_m", reaction.c_m},         {"tau_in", reaction.tau_in},
                   {"tau_out", reaction.tau_out}, {"tau_open", reaction.tau_open},
                   {"u_gate", reaction.u_gate},   {"t_foot", reaction.t_foot},
                   {"i_foot_amp", reaction.i_foot_amp}, {"dt", reaction.dt},
                   {"t_end", reaction.t_end}};
  j["apd"] = {{"g_ab", apd.g_ab},
              {"g_tm", apd.g_tm},
              {"apd_min", apd.apd_min},
              {"apd_max", apd.apd_max},
              {"bz_apd_factor", apd.bz_apd_factor}};
  j["record_period_ms"] = record_period_ms;
  j["sample_nodes"] = sample_nodes;
  j["ecg_samples"] = ecg_samples;
  j["healthy_replicates"] = healthy_replicates;
  j["root_jitter_ms"] = root_jitter_ms;
  return j.dump();
}

std::vector<infarct::Scenario> load_catalog(const RunConfig& config) {
  auto catalog = infarct::scenario_catalog();
  for (auto& s : catalog) {
    s.params.sigma = config.sigma;
    s.params.bz_radius = config.bz_radius;
  }
  if (config.catalog_path.empty()) return catalog;

  std::ifstream is(config.catalog_path);
  if (!is) throw IoError("cannot open catalog " + config.catalog_path);
  Json doc;
  try {
    doc = Json::parse(is);
  } catch (const std::exception& e) {
    throw ValidationError("catalog " + config.catalog_path + ": " + e.what());
  }
  if (!doc.is_array()) throw ValidationError("catalog must be a JSON array");
  for (const auto& entry : doc) {
    const auto name = entry.at("name").get<std::string>();
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const auto& s) { return s.name == name; });
    if (it == catalog.end()) throw ValidationError("catalog names unknown scenario '" + name + "'");
    if (it->healthy) throw ValidationError("the healthy scenario takes no scar parameters");
    if (entry.contains("tau_base")) it->params.tau_base = entry["tau_base"].get<double>();
    if (entry.contains("lambda")) it->params.lambda = entry["lambda"].get<double>();
    if (entry.contains("region")) it->params.region = entry["region"].get<std::vector<int>>();
    it->params.validate();
  }
  return catalog;
}

}  // namespace cardiotwin
