// SPDX-License-Identifier: Apache-2.0
#pragma once

// Batch orchestration: simulate a sweep to record files, analyze records
// into a dataset table, run the staged fits into a report, and emit
// plot-ready tables. Stages compose into the full pipeline and are
// deterministic for a fixed configuration and seed.

#include <cstddef>
#include <string>
#include <vector>

#include "qptrap/config.hpp"
#include "qptrap/io.hpp"

namespace qptrap::pipe {

struct SimulateSummary {
  std::size_t n_records = 0;
  std::string manifest_path;
  std::string truth_path;
};

// Writes one .absr file per (T, flux, power, segment) plus a manifest
// and a ground-truth table in dataset format. Throws ConfigError on an
// invalid grid, IoError on write failures.
SimulateSummary cmd_simulate(const cfg::PipelineConfig& config, const std::string& out_dir);

struct AnalyzeSummary {
  std::size_t n_rows = 0;
  std::size_t n_flagged = 0;
  std::string dataset_path;
};

// Analyzes every record in the manifest. Records sharing (T, flux) form
// a chain ordered by descending power then segment; each fit seeds from
// the previous model in its chain unless that fit collapsed or failed
// the gate. Rows are written in manifest order, one per record, with
// gate failures flagged rather than dropped. jobs > 1 runs chains on a
// worker pool; output still has a single deterministic writer.
AnalyzeSummary cmd_analyze(const std::string& manifest_path, const cfg::PipelineConfig& config,
                           const std::string& dataset_path, int jobs);

// Same as cmd_analyze but with the manifest already in memory; entry
// paths resolve relative to base_dir. Lets callers analyze loose record
// files by building a manifest from their headers.
AnalyzeSummary analyze_manifest(const io::Manifest& manifest, const std::string& base_dir,
                                const cfg::PipelineConfig& config,
                                const std::string& dataset_path, int jobs);

// Aggregates the dataset, runs baseline extraction and the staged fits,
// and writes the report. Stage failures become report warnings; later
// stages fall back to configured parameter values where an input from an
// earlier stage is unavailable.
io::FitReport cmd_fit(const std::string& dataset_path, const cfg::PipelineConfig& config,
                      const std::string& report_path);

// Emits plot tables from a report and its dataset: trap rate vs depth,
// rates vs temperature with model curves, normalized occupation with
// fitted curves plus a dense model grid, and the release-baseline
// consistency pair.
std::vector<std::string> cmd_report(const std::string& report_path,
                                    const std::string& dataset_path,
                                    const cfg::PipelineConfig& config,
                                    const std::string& out_dir);

struct PipelineSummary {
  SimulateSummary simulate;
  AnalyzeSummary analyze;
  std::string report_path;
  std::vector<std::string> plot_files;
};

// simulate -> analyze -> fit -> report, all under out_dir.
PipelineSummary run_pipeline(const cfg::PipelineConfig& config, const std::string& out_dir,
                             int jobs);

}  // namespace qptrap::pipe
