// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pipeline configuration: one JSON document describing the physics
// parameters, the sweep grid, simulator and HMM settings, fit windows,
// and output layout. Parsing is strict: unknown keys and malformed
// values raise ConfigError naming the offending key.

#include <cstdint>
#include <string>
#include <vector>

#include "qptrap/fitting.hpp"
#include "qptrap/hmm.hpp"
#include "qptrap/physics.hpp"

namespace qptrap::cfg {

struct EmissionConfig {
  double sigma_v = 1.0;          // per-axis Gaussian width, volts
  double snr_ref = 9.0;          // power SNR at the reference drive power
  double power_ref_dbm = -133.0;
};

struct SimulatorConfig {
  double f_s_hz = 5e6;
  double duration_s = 0.3;
  std::string mode = "ctmc";     // "ctmc" or "discrete"
  EmissionConfig emission;
};

struct GridConfig {
  std::vector<double> temperatures_k;
  std::vector<double> fluxes;        // in flux quanta, each in [0, 1]
  std::vector<double> powers_dbm;
  std::vector<int> segments;         // per-temperature record count
};

struct HmmSettings {
  int n_states = 3;
  double snr_min = 3.0;
  double tol = 1e-3;
  int max_iter = 50;
};

struct PhysicsConfig {
  double gap_uev = 185.0;
  double beta_mhz_per_ev3 = 8.73e15;
  double x_ne = 8.5e-7;
  double alpha_mhz_per_k3 = 38.51;
  // Readout clearing rate vs depth; defaults to a flat 3 kHz.
  phys::GammaRoTable gamma_ro{{50.0}, {3000.0}};
};

struct OutputConfig {
  std::string records_dir = "records";
  std::string manifest_json = "manifest.json";
  std::string dataset_csv = "dataset.csv";
  std::string truth_csv = "truth.csv";
  std::string report_json = "fit_report.json";
  std::string plots_dir = "plots";
};

struct PipelineConfig {
  PhysicsConfig physics;
  GridConfig grid;
  SimulatorConfig simulator;
  HmmSettings hmm;
  fit::FittingConfig fitting;
  OutputConfig output;
  std::uint64_t seed = 1;

  hmm::AnalyzeOptions analyze_options() const;
};

// Parses and validates; origin labels error messages (usually the path).
PipelineConfig parse_config(const std::string& json_text, const std::string& origin);

// Reads the file and delegates to parse_config. Throws IoError if the
// file cannot be read.
PipelineConfig load_config(const std::string& path);

// Serializes back to JSON (keys in the documented order); parse_config
// of the result reproduces the same configuration.
std::string config_to_json(const PipelineConfig& config);

}  // namespace qptrap::cfg
