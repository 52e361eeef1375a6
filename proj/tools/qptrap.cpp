// SPDX-License-Identifier: Apache-2.0

// Command-line front end: simulate, analyze, fit, report, and the full
// pipeline. Exit codes: 0 success, 1 validation error, 2 runtime
// failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qptrap/config.hpp"
#include "qptrap/errors.hpp"
#include "qptrap/io.hpp"
#include "qptrap/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

void print_fit_result(const char* label, const qptrap::lsq::FitResult& r) {
  if (r.estimates.empty()) return;
  std::printf("%s:\n", label);
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    const char* name = i < r.names.size() ? r.names[i].c_str() : "?";
    const double sigma = i < r.uncertainties.size() ? r.uncertainties[i] : 0.0;
    std::printf("  %-20s %.6g +- %.3g\n", name, r.estimates[i], sigma);
  }
}

qptrap::io::Manifest manifest_from_records(const std::vector<std::string>& paths) {
  qptrap::io::Manifest m;
  int i = 0;
  for (const std::string& p : paths) {
    const qptrap::Record rec = qptrap::io::read_record(p);
    qptrap::io::ManifestEntry e;
    e.file = p;
    e.t_k = rec.meta.temperature_k;
    e.flux = rec.meta.flux;
    e.power_dbm = rec.meta.power_dbm;
    e.segment = i++;
    e.seed = rec.meta.seed;
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Telegraph-signal trapping-dynamics laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_override = 0;
  int jobs = 1;
  std::vector<std::string> analyze_inputs;
  std::string dataset_arg;
  std::string report_arg;

  CLI::App* sub_sim =
      app.add_subcommand("simulate", "Generate record files for the configured sweep");
  CLI::App* sub_ana =
      app.add_subcommand("analyze", "Fit HMMs to records and emit the dataset table");
  CLI::App* sub_fit = app.add_subcommand("fit", "Run the staged parameter fits on a dataset");
  CLI::App* sub_rep = app.add_subcommand("report", "Emit plot tables from a fit report");
  CLI::App* sub_pipe =
      app.add_subcommand("pipeline", "Simulate, analyze, fit, and report in one run");

  for (CLI::App* s : {sub_sim, sub_ana, sub_fit, sub_rep, sub_pipe}) {
    s->add_option("--config", config_path, "configuration file (JSON)")->required();
    s->add_option("--out", out_dir, "output directory (default: current directory)");
  }
  sub_sim->add_option("--seed", seed_override, "override the configured base seed");
  sub_pipe->add_option("--seed", seed_override, "override the configured base seed");
  sub_ana->add_option("--jobs", jobs, "worker threads for record analysis")
      ->check(CLI::PositiveNumber);
  sub_pipe->add_option("--jobs", jobs, "worker threads for record analysis")
      ->check(CLI::PositiveNumber);
  sub_ana->add_option("inputs", analyze_inputs,
                      "manifest.json or .absr record files (default: <out>/manifest.json)");
  sub_fit->add_option("dataset", dataset_arg, "dataset CSV (default: <out>/dataset.csv)");
  sub_rep->add_option("report", report_arg, "fit report JSON (default: <out>/fit_report.json)");
  sub_rep->add_option("dataset", dataset_arg, "dataset CSV (default: <out>/dataset.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    qptrap::cfg::PipelineConfig config = qptrap::cfg::load_config(config_path);
    if (sub_sim->count("--seed") || sub_pipe->count("--seed")) config.seed = seed_override;

    if (sub_sim->parsed()) {
      const auto sum = qptrap::pipe::cmd_simulate(config, out_dir);
      std::printf("wrote %zu records under %s\n", sum.n_records, out_dir.c_str());
      std::printf("manifest: %s\n", sum.manifest_path.c_str());
      std::printf("truth: %s\n", sum.truth_path.c_str());
    } else if (sub_ana->parsed()) {
      const std::string dataset_path =
          (fs::path(out_dir) / config.output.dataset_csv).string();
      qptrap::pipe::AnalyzeSummary sum;
      const bool single_manifest =
          analyze_inputs.size() == 1 && fs::path(analyze_inputs[0]).extension() == ".json";
      if (analyze_inputs.empty()) {
        sum = qptrap::pipe::cmd_analyze(
            (fs::path(out_dir) / config.output.manifest_json).string(), config, dataset_path,
            jobs);
      } else if (single_manifest) {
        sum = qptrap::pipe::cmd_analyze(analyze_inputs[0], config, dataset_path, jobs);
      } else {
        const auto m = manifest_from_records(analyze_inputs);
        sum = qptrap::pipe::analyze_manifest(m, ".", config, dataset_path, jobs);
      }
      std::printf("dataset: %s (%zu rows, %zu flagged)\n", sum.dataset_path.c_str(),
                  sum.n_rows, sum.n_flagged);
    } else if (sub_fit->parsed()) {
      const std::string dataset_path =
          dataset_arg.empty() ? (fs::path(out_dir) / config.output.dataset_csv).string()
                              : dataset_arg;
      const std::string report_path =
          (fs::path(out_dir) / config.output.report_json).string();
      const auto report = qptrap::pipe::cmd_fit(dataset_path, config, report_path);
      for (const std::string& w : report.warnings) std::printf("warning: %s\n", w.c_str());
      print_fit_result("trap stage 1", report.trap_stage1);
      print_fit_result("trap stage 2", report.trap_stage2);
      print_fit_result("release", report.release);
      for (const auto& [depth, r] : report.alpha_m) {
        char label[64];
        std::snprintf(label, sizeof(label), "occupation, depth %.4g ueV", depth);
        print_fit_result(label, r);
      }
      std::printf("report: %s\n", report_path.c_str());
    } else if (sub_rep->parsed()) {
      const std::string report_path =
          report_arg.empty() ? (fs::path(out_dir) / config.output.report_json).string()
                             : report_arg;
      const std::string dataset_path =
          dataset_arg.empty() ? (fs::path(out_dir) / config.output.dataset_csv).string()
                              : dataset_arg;
      const auto files = qptrap::pipe::cmd_report(
          report_path, dataset_path, config,
          (fs::path(out_dir) / config.output.plots_dir).string());
      for (const std::string& f : files) std::printf("wrote %s\n", f.c_str());
    } else if (sub_pipe->parsed()) {
      const auto sum = qptrap::pipe::run_pipeline(config, out_dir, jobs);
      std::printf("wrote %zu records under %s\n", sum.simulate.n_records, out_dir.c_str());
      std::printf("dataset: %s (%zu rows, %zu flagged)\n", sum.analyze.dataset_path.c_str(),
                  sum.analyze.n_rows, sum.analyze.n_flagged);
      std::printf("report: %s\n", sum.report_path.c_str());
      for (const std::string& f : sum.plot_files) std::printf("wrote %s\n", f.c_str());
    }
    return 0;
  } catch (const qptrap::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
