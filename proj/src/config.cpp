// SPDX-License-Identifier: Apache-2.0

#include "qptrap/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qptrap/errors.hpp"

namespace qptrap::cfg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

// Rejects keys outside the allowed set so typos fail loudly instead of
// silently taking defaults.
void check_keys(const json& obj, const std::string& origin, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(origin, section + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!ok.count(key)) fail(origin, "unknown key \"" + section + "." + key + "\"");
  }
}

double get_number(const json& obj, const std::string& origin, const std::string& path) {
  if (!obj.is_number()) fail(origin, path + " must be a number");
  return obj.get<double>();
}

int get_int(const json& obj, const std::string& origin, const std::string& path) {
  if (!obj.is_number_integer()) fail(origin, path + " must be an integer");
  return obj.get<int>();
}

std::string get_string(const json& obj, const std::string& origin, const std::string& path) {
  if (!obj.is_string()) fail(origin, path + " must be a string");
  return obj.get<std::string>();
}

std::vector<double> get_number_list(const json& obj, const std::string& origin,
                                    const std::string& path) {
  if (!obj.is_array() || obj.empty()) fail(origin, path + " must be a non-empty array");
  std::vector<double> out;
  for (const auto& v : obj) {
    if (!v.is_number()) fail(origin, path + " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void parse_physics(const json& j, const std::string& origin, PhysicsConfig& out) {
  check_keys(j, origin, "physics",
             {"gap_uev", "beta_mhz_per_ev3", "x_ne", "alpha_mhz_per_k3", "gamma_ro_table"});
  if (j.contains("gap_uev")) out.gap_uev = get_number(j["gap_uev"], origin, "physics.gap_uev");
  if (j.contains("beta_mhz_per_ev3"))
    out.beta_mhz_per_ev3 = get_number(j["beta_mhz_per_ev3"], origin, "physics.beta_mhz_per_ev3");
  if (j.contains("x_ne")) out.x_ne = get_number(j["x_ne"], origin, "physics.x_ne");
  if (j.contains("alpha_mhz_per_k3"))
    out.alpha_mhz_per_k3 = get_number(j["alpha_mhz_per_k3"], origin, "physics.alpha_mhz_per_k3");
  if (out.gap_uev <= 0.0) fail(origin, "physics.gap_uev must be positive");
  if (out.beta_mhz_per_ev3 < 0.0) fail(origin, "physics.beta_mhz_per_ev3 must be non-negative");
  if (out.x_ne < 0.0) fail(origin, "physics.x_ne must be non-negative");
  if (out.alpha_mhz_per_k3 < 0.0) fail(origin, "physics.alpha_mhz_per_k3 must be non-negative");

  if (j.contains("gamma_ro_table")) {
    const json& t = j["gamma_ro_table"];
    check_keys(t, origin, "physics.gamma_ro_table", {"delta_a_uev", "gamma_ro_hz"});
    if (!t.contains("delta_a_uev") || !t.contains("gamma_ro_hz"))
      fail(origin, "physics.gamma_ro_table needs both delta_a_uev and gamma_ro_hz");
    auto depths = get_number_list(t["delta_a_uev"], origin, "physics.gamma_ro_table.delta_a_uev");
    auto rates = get_number_list(t["gamma_ro_hz"], origin, "physics.gamma_ro_table.gamma_ro_hz");
    if (depths.size() != rates.size())
      fail(origin, "physics.gamma_ro_table arrays must have equal length");
    for (std::size_t i = 1; i < depths.size(); ++i)
      if (depths[i] <= depths[i - 1])
        fail(origin, "physics.gamma_ro_table.delta_a_uev must be strictly ascending");
    for (double r : rates)
      if (r < 0.0) fail(origin, "physics.gamma_ro_table.gamma_ro_hz must be non-negative");
    out.gamma_ro = phys::GammaRoTable(std::move(depths), std::move(rates));
  }
}

void parse_grid(const json& j, const std::string& origin, GridConfig& out) {
  check_keys(j, origin, "grid", {"temperatures_k", "fluxes", "powers_dbm", "segments"});
  if (!j.contains("temperatures_k") || !j.contains("fluxes"))
    fail(origin, "grid needs temperatures_k and fluxes");
  out.temperatures_k = get_number_list(j["temperatures_k"], origin, "grid.temperatures_k");
  out.fluxes = get_number_list(j["fluxes"], origin, "grid.fluxes");
  if (j.contains("powers_dbm"))
    out.powers_dbm = get_number_list(j["powers_dbm"], origin, "grid.powers_dbm");
  if (out.powers_dbm.empty()) out.powers_dbm = {-133.0};

  for (double t : out.temperatures_k)
    if (t <= 0.0) fail(origin, "grid.temperatures_k must be positive");
  for (double f : out.fluxes) {
    if (f > 1.0) fail(origin, "grid.fluxes: flux " + std::to_string(f) + " exceeds 1");
    if (f < 0.0) fail(origin, "grid.fluxes: flux " + std::to_string(f) + " is negative");
  }

  out.segments.assign(out.temperatures_k.size(), 1);
  if (j.contains("segments")) {
    const json& s = j["segments"];
    if (s.is_number_integer()) {
      const int n = s.get<int>();
      if (n < 1) fail(origin, "grid.segments must be >= 1");
      out.segments.assign(out.temperatures_k.size(), n);
    } else if (s.is_array()) {
      if (s.size() != out.temperatures_k.size())
        fail(origin, "grid.segments array must match temperatures_k in length");
      out.segments.clear();
      for (const auto& v : s) {
        if (!v.is_number_integer() || v.get<int>() < 1)
          fail(origin, "grid.segments entries must be integers >= 1");
        out.segments.push_back(v.get<int>());
      }
    } else {
      fail(origin, "grid.segments must be an integer or an array of integers");
    }
  }
}

void parse_simulator(const json& j, const std::string& origin, SimulatorConfig& out) {
  check_keys(j, origin, "simulator", {"f_s_hz", "duration_s", "mode", "emission"});
  if (j.contains("f_s_hz")) out.f_s_hz = get_number(j["f_s_hz"], origin, "simulator.f_s_hz");
  if (j.contains("duration_s"))
    out.duration_s = get_number(j["duration_s"], origin, "simulator.duration_s");
  if (j.contains("mode")) out.mode = get_string(j["mode"], origin, "simulator.mode");
  if (out.f_s_hz <= 0.0) fail(origin, "simulator.f_s_hz must be positive");
  if (out.duration_s <= 0.0) fail(origin, "simulator.duration_s must be positive");
  if (out.mode != "ctmc" && out.mode != "discrete")
    fail(origin, "simulator.mode must be \"ctmc\" or \"discrete\"");

  if (j.contains("emission")) {
    const json& e = j["emission"];
    check_keys(e, origin, "simulator.emission", {"sigma_v", "snr_ref", "power_ref_dbm"});
    if (e.contains("sigma_v"))
      out.emission.sigma_v = get_number(e["sigma_v"], origin, "simulator.emission.sigma_v");
    if (e.contains("snr_ref"))
      out.emission.snr_ref = get_number(e["snr_ref"], origin, "simulator.emission.snr_ref");
    if (e.contains("power_ref_dbm"))
      out.emission.power_ref_dbm =
          get_number(e["power_ref_dbm"], origin, "simulator.emission.power_ref_dbm");
    if (out.emission.sigma_v <= 0.0) fail(origin, "simulator.emission.sigma_v must be positive");
    if (out.emission.snr_ref <= 0.0) fail(origin, "simulator.emission.snr_ref must be positive");
  }
}

void parse_hmm(const json& j, const std::string& origin, HmmSettings& out) {
  check_keys(j, origin, "hmm", {"n_states", "snr_min", "tol", "max_iter"});
  if (j.contains("n_states")) out.n_states = get_int(j["n_states"], origin, "hmm.n_states");
  if (j.contains("snr_min")) out.snr_min = get_number(j["snr_min"], origin, "hmm.snr_min");
  if (j.contains("tol")) out.tol = get_number(j["tol"], origin, "hmm.tol");
  if (j.contains("max_iter")) out.max_iter = get_int(j["max_iter"], origin, "hmm.max_iter");
  if (out.n_states < 2) fail(origin, "hmm.n_states must be >= 2");
  if (out.snr_min <= 0.0) fail(origin, "hmm.snr_min must be positive");
  if (out.tol <= 0.0) fail(origin, "hmm.tol must be positive");
  if (out.max_iter < 1) fail(origin, "hmm.max_iter must be >= 1");
}

void parse_fitting(const json& j, const std::string& origin, fit::FittingConfig& out) {
  check_keys(j, origin, "fitting",
             {"trap_baseline_t_max_k", "release_baseline_t_max_k", "nbar_baseline_t_max_k",
              "release_t_cut_k", "nbar_t_max_k", "exclude_below_t_cut", "clip_fraction"});
  if (j.contains("trap_baseline_t_max_k"))
    out.trap_baseline_t_max_k =
        get_number(j["trap_baseline_t_max_k"], origin, "fitting.trap_baseline_t_max_k");
  if (j.contains("release_baseline_t_max_k"))
    out.release_baseline_t_max_k =
        get_number(j["release_baseline_t_max_k"], origin, "fitting.release_baseline_t_max_k");
  if (j.contains("nbar_baseline_t_max_k"))
    out.nbar_baseline_t_max_k =
        get_number(j["nbar_baseline_t_max_k"], origin, "fitting.nbar_baseline_t_max_k");
  if (j.contains("release_t_cut_k"))
    out.release_t_cut_k = get_number(j["release_t_cut_k"], origin, "fitting.release_t_cut_k");
  if (j.contains("nbar_t_max_k"))
    out.nbar_t_max_k = get_number(j["nbar_t_max_k"], origin, "fitting.nbar_t_max_k");
  if (j.contains("exclude_below_t_cut")) {
    if (!j["exclude_below_t_cut"].is_boolean())
      fail(origin, "fitting.exclude_below_t_cut must be a boolean");
    out.exclude_below_t_cut = j["exclude_below_t_cut"].get<bool>();
  }
  if (j.contains("clip_fraction"))
    out.clip_fraction = get_number(j["clip_fraction"], origin, "fitting.clip_fraction");
  if (out.clip_fraction <= 0.0 || out.clip_fraction > 1.0)
    fail(origin, "fitting.clip_fraction must be in (0, 1]");
}

void parse_output(const json& j, const std::string& origin, OutputConfig& out) {
  check_keys(j, origin, "output",
             {"records_dir", "manifest_json", "dataset_csv", "truth_csv", "report_json",
              "plots_dir"});
  if (j.contains("records_dir"))
    out.records_dir = get_string(j["records_dir"], origin, "output.records_dir");
  if (j.contains("manifest_json"))
    out.manifest_json = get_string(j["manifest_json"], origin, "output.manifest_json");
  if (j.contains("dataset_csv"))
    out.dataset_csv = get_string(j["dataset_csv"], origin, "output.dataset_csv");
  if (j.contains("truth_csv"))
    out.truth_csv = get_string(j["truth_csv"], origin, "output.truth_csv");
  if (j.contains("report_json"))
    out.report_json = get_string(j["report_json"], origin, "output.report_json");
  if (j.contains("plots_dir"))
    out.plots_dir = get_string(j["plots_dir"], origin, "output.plots_dir");
}

}  // namespace

hmm::AnalyzeOptions PipelineConfig::analyze_options() const {
  hmm::AnalyzeOptions opt;
  opt.n_states = hmm.n_states;
  opt.snr_min = hmm.snr_min;
  opt.fit.tol = hmm.tol;
  opt.fit.max_iter = hmm.max_iter;
  return opt;
}

PipelineConfig parse_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("not valid JSON: ") + e.what());
  }
  check_keys(root, origin, "(top level)",
             {"physics", "grid", "simulator", "hmm", "fitting", "output", "seed"});
  if (!root.contains("grid")) fail(origin, "missing required section \"grid\"");

  PipelineConfig out;
  if (root.contains("physics")) parse_physics(root["physics"], origin, out.physics);
  parse_grid(root["grid"], origin, out.grid);
  if (root.contains("simulator")) parse_simulator(root["simulator"], origin, out.simulator);
  if (root.contains("hmm")) parse_hmm(root["hmm"], origin, out.hmm);
  if (root.contains("fitting")) parse_fitting(root["fitting"], origin, out.fitting);
  if (root.contains("output")) parse_output(root["output"], origin, out.output);
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
      fail(origin, "seed must be a non-negative integer");
    const auto s = root["seed"].get<std::int64_t>();
    if (s < 0) fail(origin, "seed must be a non-negative integer");
    out.seed = static_cast<std::uint64_t>(s);
  }
  out.fitting.record_duration_s = out.simulator.duration_s;
  return out;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string config_to_json(const PipelineConfig& config) {
  nlohmann::ordered_json j;
  j["physics"]["gap_uev"] = config.physics.gap_uev;
  j["physics"]["beta_mhz_per_ev3"] = config.physics.beta_mhz_per_ev3;
  j["physics"]["x_ne"] = config.physics.x_ne;
  j["physics"]["alpha_mhz_per_k3"] = config.physics.alpha_mhz_per_k3;
  if (!config.physics.gamma_ro.empty()) {
    std::vector<double> depths, rates;
    for (std::size_t i = 0; i < config.physics.gamma_ro.size(); ++i) {
      depths.push_back(config.physics.gamma_ro.knot(i));
      rates.push_back(config.physics.gamma_ro.rate(i));
    }
    j["physics"]["gamma_ro_table"]["delta_a_uev"] = depths;
    j["physics"]["gamma_ro_table"]["gamma_ro_hz"] = rates;
  }
  j["grid"]["temperatures_k"] = config.grid.temperatures_k;
  j["grid"]["fluxes"] = config.grid.fluxes;
  j["grid"]["powers_dbm"] = config.grid.powers_dbm;
  j["grid"]["segments"] = config.grid.segments;
  j["simulator"]["f_s_hz"] = config.simulator.f_s_hz;
  j["simulator"]["duration_s"] = config.simulator.duration_s;
  j["simulator"]["mode"] = config.simulator.mode;
  j["simulator"]["emission"]["sigma_v"] = config.simulator.emission.sigma_v;
  j["simulator"]["emission"]["snr_ref"] = config.simulator.emission.snr_ref;
  j["simulator"]["emission"]["power_ref_dbm"] = config.simulator.emission.power_ref_dbm;
  j["hmm"]["n_states"] = config.hmm.n_states;
  j["hmm"]["snr_min"] = config.hmm.snr_min;
  j["hmm"]["tol"] = config.hmm.tol;
  j["hmm"]["max_iter"] = config.hmm.max_iter;
  j["fitting"]["trap_baseline_t_max_k"] = config.fitting.trap_baseline_t_max_k;
  j["fitting"]["release_baseline_t_max_k"] = config.fitting.release_baseline_t_max_k;
  j["fitting"]["nbar_baseline_t_max_k"] = config.fitting.nbar_baseline_t_max_k;
  j["fitting"]["release_t_cut_k"] = config.fitting.release_t_cut_k;
  j["fitting"]["nbar_t_max_k"] = config.fitting.nbar_t_max_k;
  j["fitting"]["exclude_below_t_cut"] = config.fitting.exclude_below_t_cut;
  j["fitting"]["clip_fraction"] = config.fitting.clip_fraction;
  j["output"]["records_dir"] = config.output.records_dir;
  j["output"]["manifest_json"] = config.output.manifest_json;
  j["output"]["dataset_csv"] = config.output.dataset_csv;
  j["output"]["truth_csv"] = config.output.truth_csv;
  j["output"]["report_json"] = config.output.report_json;
  j["output"]["plots_dir"] = config.output.plots_dir;
  j["seed"] = config.seed;
  return j.dump(2) + "\n";
}

}  // namespace qptrap::cfg
