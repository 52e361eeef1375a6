// SPDX-License-Identifier: Apache-2.0
#pragma once

// Staged parameter extraction from an analyzed sweep: low-temperature
// baselines, the two-stage trap-rate fit (beta and gap, then x_ne), the
// phonon-clearing fit (alpha), per-depth normalized-occupation fits
// (alpha_M), and the release-baseline consistency check.

#include <cstdint>
#include <map>
#include <vector>

#include "qptrap/leastsq.hpp"

namespace qptrap::fit {

// One analyzed record, as stored in the dataset table.
struct SweepRow {
  double t_k = 0.0;
  double flux = 0.0;
  double delta_a_uev = 0.0;
  double gamma_trap_hz = 0.0;
  double gamma_release_hz = 0.0;
  double n_bar = 0.0;
  double eff_fs_hz = 0.0;
  double snr = 0.0;
  std::uint32_t flags = 0;
};

// Per-(T, flux) aggregate over clean rows.
struct AggregatedRow {
  double t_k = 0.0;
  double flux = 0.0;
  double delta_a_uev = 0.0;
  double gamma_trap_hz = 0.0;
  double gamma_release_hz = 0.0;
  double n_bar = 0.0;
  double eff_fs_hz = 0.0;
  double snr = 0.0;
  int n_records = 0;
};

struct SweepDataset {
  std::vector<AggregatedRow> rows;   // unique (T, flux), sorted by (T, flux)
  std::vector<double> depths() const;  // distinct trap depths, ascending
};

// Averages per-record rows sharing (T, flux); rows with nonzero flags are
// skipped entirely.
SweepDataset aggregate(const std::vector<SweepRow>& rows);

enum class Quantity { trap_rate, release_rate, mean_occupation };

// Trap depth (ueV) -> baseline value.
using Baselines = std::map<double, double>;

// Per-depth mean of the selected quantity over rows with T < t_max_k.
// Throws MissingBaselineError naming the depth if one has no cold rows.
Baselines low_t_baseline(const SweepDataset& dataset, double t_max_k, Quantity quantity);

struct FittingConfig {
  double trap_baseline_t_max_k = 0.08;
  double release_baseline_t_max_k = 0.06;
  double nbar_baseline_t_max_k = 0.06;
  double release_t_cut_k = 0.09;
  // Rows warmer than this are left out of the occupation fits (where the
  // per-step transition probabilities get large enough to distort n).
  double nbar_t_max_k = 10.0;
  bool exclude_below_t_cut = true;
  // Rows with release rate above this fraction of the effective sample
  // rate are dropped from the release fit as clipped.
  double clip_fraction = 0.5;
  // Per-record duration in seconds; > 0 enables transition-count
  // weighting of the residuals.
  double record_duration_s = 0.0;
  lsq::LsqOptions solver;
};

// Gamma_trap - baseline = beta Delta_A^3 sqrt(2 pi k_B T / gap)
// exp(-gap / k_B T); free: beta (MHz/eV^3) and gap (ueV).
lsq::FitResult fit_trap_stage1(const SweepDataset& dataset, const Baselines& trap0,
                               const FittingConfig& cfg);

// Gamma_trap / baseline = 1 + (1/x_ne) sqrt(2 pi k_B T / gap)
// exp(-gap / k_B T) with the gap held fixed; free: x_ne.
lsq::FitResult fit_trap_stage2(const SweepDataset& dataset, const Baselines& trap0,
                               double gap_uev, const FittingConfig& cfg);

// Gamma_release - baseline = alpha T^3 bracket(Delta_A / k_B T) over
// rows with T >= release_t_cut_k; free: alpha (MHz/K^3).
lsq::FitResult fit_release(const SweepDataset& dataset, const Baselines& release0,
                           const FittingConfig& cfg);

// Per-depth fit of the normalized mean occupation with alpha_M (1/K^3)
// free; x_ne and the gap come from the earlier stages.
std::map<double, lsq::FitResult> fit_mean_occupation(const SweepDataset& dataset,
                                                     const Baselines& nbar0, double x_ne,
                                                     double gap_uev, const FittingConfig& cfg);

struct ConsistencyReport {
  std::vector<double> delta_a_uev;
  std::vector<double> release_baseline_hz;     // measured cold release rate
  std::vector<double> alpha_over_alpha_m_hz;   // same quantity via the fits
  std::vector<double> ratio;                   // fitted over measured
  double nrms = 0.0;
  double threshold = 0.15;
  bool flagged = false;
};

// Compares the measured release baseline against alpha / alpha_M on the
// shared depth grid. Throws ConfigError if the grids differ.
ConsistencyReport consistency_check(const lsq::FitResult& alpha_fit,
                                    const std::map<double, lsq::FitResult>& alpha_m,
                                    const Baselines& release0, double threshold = 0.15);

}  // namespace qptrap::fit
