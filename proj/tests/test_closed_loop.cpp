// SPDX-License-Identifier: Apache-2.0

// End-to-end closed loop at reduced scale: synthesize a small sweep from
// known parameters, run the full analyze + fit chain in process, and check
// that the staged fits land in the right neighborhood. Tolerances here are
// statistical: a 36-record sweep scatters far more than the full-size
// acceptance run, so they bound gross regressions, not precision.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "qptrap/config.hpp"
#include "qptrap/io.hpp"
#include "qptrap/physics.hpp"
#include "qptrap/pipeline.hpp"
#include "qptrap/units.hpp"

namespace fs = std::filesystem;
using namespace qptrap;

namespace {

cfg::PipelineConfig small_sweep_config(std::uint64_t seed) {
  cfg::PipelineConfig c;
  c.physics.gamma_ro = phys::GammaRoTable({30.0, 55.0}, {2500.0, 3500.0});
  c.grid.temperatures_k = {0.035, 0.05, 0.075, 0.11, 0.15, 0.19};
  c.grid.fluxes = {0.40, 0.46, 0.5};
  c.grid.powers_dbm = {-133.0};
  c.grid.segments = {2, 2, 2, 2, 2, 2};
  c.simulator.f_s_hz = 2e6;
  c.simulator.duration_s = 0.15;
  c.simulator.mode = "discrete";
  c.hmm.n_states = 2;
  c.hmm.max_iter = 300;
  c.fitting.trap_baseline_t_max_k = 0.08;
  c.fitting.release_baseline_t_max_k = 0.06;
  c.fitting.nbar_baseline_t_max_k = 0.06;
  c.fitting.release_t_cut_k = 0.09;
  c.fitting.nbar_t_max_k = 0.155;
  c.fitting.record_duration_s = c.simulator.duration_s;
  c.seed = seed;
  return c;
}

struct LoopOutcome {
  io::FitReport report;
  std::size_t n_rows = 0;
  std::size_t n_flagged = 0;
  std::string dataset_bytes_head;
};

LoopOutcome run_loop(std::uint64_t seed) {
  const cfg::PipelineConfig c = small_sweep_config(seed);
  const fs::path dir =
      fs::temp_directory_path() / ("qptrap_closed_loop_" + std::to_string(seed));
  fs::remove_all(dir);
  const auto summary = pipe::run_pipeline(c, dir.string(), 1);
  LoopOutcome out;
  out.report = io::read_fit_report(summary.report_path);
  out.n_rows = summary.analyze.n_rows;
  out.n_flagged = summary.analyze.n_flagged;
  const auto rows = io::read_dataset(summary.analyze.dataset_path);
  for (std::size_t i = 0; i < std::min<std::size_t>(rows.size(), 4); ++i)
    out.dataset_bytes_head += io::format_double(rows[i].gamma_trap_hz) + ";";
  fs::remove_all(dir);
  return out;
}

void check_recovery(const LoopOutcome& out) {
  const cfg::PipelineConfig c = small_sweep_config(0);
  const auto& rep = out.report;

  CHECK(out.n_rows == 36);
  CHECK(out.n_flagged == 0);

  const double gap = rep.trap_stage1.estimates.at(1);
  const double beta = rep.trap_stage1.estimates.at(0);
  const double x_ne = rep.trap_stage2.estimates.at(0);
  const double alpha = rep.release.estimates.at(0);
  CHECK(std::fabs(gap / c.physics.gap_uev - 1.0) < 0.10);
  CHECK(beta / c.physics.beta_mhz_per_ev3 > 1.0 / 3.0);
  CHECK(beta / c.physics.beta_mhz_per_ev3 < 3.0);
  CHECK(x_ne / c.physics.x_ne > 1.0 / 3.0);
  CHECK(x_ne / c.physics.x_ne < 3.0);
  CHECK(std::fabs(alpha / c.physics.alpha_mhz_per_k3 - 1.0) < 0.10);

  REQUIRE(rep.alpha_m.size() == 3);
  for (const auto& [depth, fit] : rep.alpha_m) {
    const double composite =
        fit.estimates.at(0) * c.physics.gamma_ro(depth) / (alpha * units::mhz_to_hz);
    CHECK(std::fabs(composite - 1.0) < 0.40);
  }

  CHECK(rep.consistency.nrms < 0.35);
  CHECK(rep.consistency.delta_a_uev.size() == 3);
}

}  // namespace

TEST_CASE("small synthetic sweep recovers its generating parameters") {
  const LoopOutcome a = run_loop(11);
  const LoopOutcome b = run_loop(29);
  check_recovery(a);
  check_recovery(b);

  // Different seeds must produce genuinely different data and fits.
  CHECK(a.dataset_bytes_head != b.dataset_bytes_head);
  CHECK(a.report.trap_stage1.estimates.at(0) != b.report.trap_stage1.estimates.at(0));
}
