// SPDX-License-Identifier: Apache-2.0

#include "qptrap/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "qptrap/errors.hpp"
#include "qptrap/physics.hpp"
#include "qptrap/specfun.hpp"
#include "qptrap/units.hpp"

namespace qptrap::fit {

namespace {

// sqrt(2 pi k_B T / gap) exp(-gap / k_B T), the thermal part of the
// fractional QP density.
double thermal_density(double temperature_k, double gap_uev) {
  phys::TrapModelParams p;
  p.x_ne = 0.0;
  p.gap_uev = gap_uev;
  return phys::qp_density(temperature_k, p);
}

double bracket_at(double delta_a_uev, double temperature_k) {
  return specfun::debye_bracket(delta_a_uev / (units::k_B * temperature_k));
}

// 1 sigma of a rate estimated from roughly (rate * source occupancy *
// duration) observed transitions.
double rate_sigma(double rate_hz, double occupancy, double duration_s) {
  const double denom = std::max(occupancy, 1e-3) * duration_s;
  return std::sqrt((rate_hz + 1.0) / denom);
}

}  // namespace

std::vector<double> SweepDataset::depths() const {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.delta_a_uev);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SweepDataset aggregate(const std::vector<SweepRow>& rows) {
  std::map<std::pair<double, double>, AggregatedRow> groups;
  for (const SweepRow& r : rows) {
    if (r.flags != 0) continue;
    AggregatedRow& g = groups[{r.t_k, r.flux}];
    g.t_k = r.t_k;
    g.flux = r.flux;
    g.delta_a_uev = r.delta_a_uev;
    g.gamma_trap_hz += r.gamma_trap_hz;
    g.gamma_release_hz += r.gamma_release_hz;
    g.n_bar += r.n_bar;
    g.eff_fs_hz += r.eff_fs_hz;
    g.snr += r.snr;
    g.n_records += 1;
  }
  SweepDataset out;
  for (auto& [key, g] : groups) {
    const double inv = 1.0 / g.n_records;
    g.gamma_trap_hz *= inv;
    g.gamma_release_hz *= inv;
    g.n_bar *= inv;
    g.eff_fs_hz *= inv;
    g.snr *= inv;
    out.rows.push_back(g);
  }
  return out;
}

Baselines low_t_baseline(const SweepDataset& dataset, double t_max_k, Quantity quantity) {
  std::map<double, std::pair<double, int>> acc;
  for (const AggregatedRow& r : dataset.rows) acc.emplace(r.delta_a_uev, std::pair<double, int>{0.0, 0});
  for (const AggregatedRow& r : dataset.rows) {
    if (r.t_k >= t_max_k) continue;
    double v = 0.0;
    switch (quantity) {
      case Quantity::trap_rate:
        v = r.gamma_trap_hz;
        break;
      case Quantity::release_rate:
        v = r.gamma_release_hz;
        break;
      case Quantity::mean_occupation:
        v = r.n_bar;
        break;
    }
    auto& slot = acc[r.delta_a_uev];
    slot.first += v;
    slot.second += 1;
  }
  Baselines out;
  for (const auto& [depth, slot] : acc) {
    if (slot.second == 0)
      throw MissingBaselineError("no rows below " + std::to_string(t_max_k) +
                                 " K for trap depth " + std::to_string(depth) + " ueV");
    out[depth] = slot.first / slot.second;
  }
  return out;
}

lsq::FitResult fit_trap_stage1(const SweepDataset& dataset, const Baselines& trap0,
                               const FittingConfig& cfg) {
  std::vector<double> t, depth, y, sig;
  for (const AggregatedRow& r : dataset.rows) {
    const auto it = trap0.find(r.delta_a_uev);
    if (it == trap0.end())
      throw MissingBaselineError("no trap baseline for depth " +
                                 std::to_string(r.delta_a_uev) + " ueV");
    t.push_back(r.t_k);
    depth.push_back(r.delta_a_uev);
    y.push_back(r.gamma_trap_hz - it->second);
    if (cfg.record_duration_s > 0.0)
      sig.push_back(rate_sigma(r.gamma_trap_hz, 1.0 - r.n_bar,
                               cfg.record_duration_s * r.n_records));
  }
  const lsq::ModelFn model = [&](const double* p, std::vector<double>& out) {
    const double beta = p[0];
    const double gap = p[1];
    out.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      out[i] = beta * units::beta_uev3_to_hz * depth[i] * depth[i] * depth[i] *
               thermal_density(t[i], gap);
  };

  // Single-point solve at the hottest deep row seeds beta.
  double gap_init = 180.0;
  std::size_t hot = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::make_pair(depth[i], t[i]) > std::make_pair(depth[hot], t[hot])) hot = i;
  }
  double beta_init = 1e15;
  const double denom =
      units::beta_uev3_to_hz * std::pow(depth[hot], 3) * thermal_density(t[hot], gap_init);
  if (y[hot] > 0.0 && denom > 0.0) beta_init = y[hot] / denom;
  beta_init = std::clamp(beta_init, 1.0, 1e25);

  return lsq::least_squares(model, y, sig, {beta_init, gap_init}, {1.0, 100.0}, {1e25, 300.0},
                            {"beta_mhz_per_ev3", "gap_uev"}, cfg.solver);
}

lsq::FitResult fit_trap_stage2(const SweepDataset& dataset, const Baselines& trap0,
                               double gap_uev, const FittingConfig& cfg) {
  std::vector<double> t, y, sig;
  for (const AggregatedRow& r : dataset.rows) {
    const auto it = trap0.find(r.delta_a_uev);
    if (it == trap0.end())
      throw MissingBaselineError("no trap baseline for depth " +
                                 std::to_string(r.delta_a_uev) + " ueV");
    if (it->second <= 0.0) continue;
    t.push_back(r.t_k);
    y.push_back(r.gamma_trap_hz / it->second);
    if (cfg.record_duration_s > 0.0)
      sig.push_back(rate_sigma(r.gamma_trap_hz, 1.0 - r.n_bar,
                               cfg.record_duration_s * r.n_records) /
                    it->second);
  }
  if (t.size() < 2) throw ConfigError("too few rows with positive trap baselines");
  const lsq::ModelFn model = [&](const double* p, std::vector<double>& out) {
    out.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      out[i] = 1.0 + thermal_density(t[i], gap_uev) / p[0];
  };

  std::size_t hot = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[hot]) hot = i;
  double x_init = 1e-6;
  if (y[hot] > 1.0) x_init = thermal_density(t[hot], gap_uev) / (y[hot] - 1.0);
  x_init = std::clamp(x_init, 1e-12, 1e-2);

  lsq::FitResult res = lsq::least_squares(model, y, sig, {x_init}, {1e-12}, {1e-2}, {"x_ne"},
                                          cfg.solver);
  if (y[hot] < 1.5)
    res.notes.push_back("thermal excess below 50% everywhere; x_ne weakly constrained");
  return res;
}

lsq::FitResult fit_release(const SweepDataset& dataset, const Baselines& release0,
                           const FittingConfig& cfg) {
  std::vector<double> t, depth, y, sig;
  int clipped = 0;
  for (const AggregatedRow& r : dataset.rows) {
    if (cfg.exclude_below_t_cut && r.t_k < cfg.release_t_cut_k) continue;
    const auto it = release0.find(r.delta_a_uev);
    if (it == release0.end())
      throw MissingBaselineError("no release baseline for depth " +
                                 std::to_string(r.delta_a_uev) + " ueV");
    if (r.gamma_release_hz > cfg.clip_fraction * r.eff_fs_hz) {
      ++clipped;
      continue;
    }
    t.push_back(r.t_k);
    depth.push_back(r.delta_a_uev);
    y.push_back(r.gamma_release_hz - it->second);
    if (cfg.record_duration_s > 0.0)
      sig.push_back(
          rate_sigma(r.gamma_release_hz, r.n_bar, cfg.record_duration_s * r.n_records));
  }
  if (t.size() < 2) throw ConfigError("too few rows above the release fit cutoff");
  const lsq::ModelFn model = [&](const double* p, std::vector<double>& out) {
    out.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      out[i] = p[0] * units::mhz_to_hz * t[i] * t[i] * t[i] * bracket_at(depth[i], t[i]);
  };

  std::size_t hot = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[hot]) hot = i;
  double alpha_init = 10.0;
  const double denom =
      units::mhz_to_hz * std::pow(t[hot], 3) * bracket_at(depth[hot], t[hot]);
  if (y[hot] > 0.0 && denom > 0.0) alpha_init = y[hot] / denom;
  alpha_init = std::clamp(alpha_init, 1e-6, 1e6);

  lsq::FitResult res = lsq::least_squares(model, y, sig, {alpha_init}, {1e-6}, {1e6},
                                          {"alpha_mhz_per_k3"}, cfg.solver);
  if (clipped > 0)
    res.notes.push_back(std::to_string(clipped) +
                        " rows excluded as clipped against the effective sample rate");
  return res;
}

std::map<double, lsq::FitResult> fit_mean_occupation(const SweepDataset& dataset,
                                                     const Baselines& nbar0, double x_ne,
                                                     double gap_uev, const FittingConfig& cfg) {
  std::map<double, lsq::FitResult> out;
  for (double d : dataset.depths()) {
    const auto it = nbar0.find(d);
    if (it == nbar0.end() || it->second <= 0.0)
      throw MissingBaselineError("no occupation baseline for depth " + std::to_string(d) +
                                 " ueV");
    // Normalize in odds form: n/(1-n) equals the trap-to-release rate
    // ratio of the stationary two-state system exactly, so the model
    // stays unbiased even where the baseline occupation is not small.
    if (it->second >= 1.0)
      throw ConfigError("occupation baseline at depth " + std::to_string(d) + " is saturated");
    const double norm = it->second / (1.0 - it->second);
    std::vector<double> t, y, sig;
    for (const AggregatedRow& r : dataset.rows) {
      if (r.delta_a_uev != d || r.t_k > cfg.nbar_t_max_k) continue;
      if (r.n_bar >= 1.0)
        throw ConfigError("saturated occupation row at depth " + std::to_string(d));
      t.push_back(r.t_k);
      const double one_minus = 1.0 - r.n_bar;
      y.push_back(r.n_bar / one_minus / norm);
      if (cfg.record_duration_s > 0.0) {
        const double total_rate = r.gamma_trap_hz + r.gamma_release_hz;
        const double var = 2.0 * std::max(r.n_bar * one_minus, 1e-6) /
                           (std::max(total_rate, 1.0) * cfg.record_duration_s * r.n_records);
        sig.push_back(std::sqrt(var) / (one_minus * one_minus) / norm);
      }
    }
    if (t.size() < 2) throw ConfigError("too few occupation rows at depth " + std::to_string(d));
    const lsq::ModelFn model = [&](const double* p, std::vector<double>& pred) {
      pred.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        pred[i] = phys::normalized_mean_occupation(d, t[i], x_ne, gap_uev, p[0]);
    };

    std::size_t hot = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
      if (t[i] > t[hot]) hot = i;
    double am_init = 1.0;
    const double numer = 1.0 + thermal_density(t[hot], gap_uev) / x_ne;
    const double tb = std::pow(t[hot], 3) * bracket_at(d, t[hot]);
    if (y[hot] > 0.0 && tb > 0.0 && numer / y[hot] > 1.0)
      am_init = (numer / y[hot] - 1.0) / tb;
    am_init = std::clamp(am_init, 1e-12, 1e12);

    out.emplace(d, lsq::least_squares(model, y, sig, {am_init}, {1e-12}, {1e12},
                                      {"alpha_m_per_k3"}, cfg.solver));
  }
  return out;
}

ConsistencyReport consistency_check(const lsq::FitResult& alpha_fit,
                                    const std::map<double, lsq::FitResult>& alpha_m,
                                    const Baselines& release0, double threshold) {
  if (alpha_m.size() != release0.size())
    throw ConfigError("alpha_M and release-baseline depth grids differ in size");
  ConsistencyReport rep;
  rep.threshold = threshold;
  const double alpha_hz = alpha_fit.estimates.at(0) * units::mhz_to_hz;
  double ss = 0.0;
  double mean_b = 0.0;
  auto it_b = release0.begin();
  for (const auto& [depth, am] : alpha_m) {
    if (std::fabs(it_b->first - depth) > 1e-9 * std::max(1.0, std::fabs(depth)))
      throw ConfigError("alpha_M and release-baseline depth grids do not line up");
    const double fitted = alpha_hz / am.estimates.at(0);
    const double measured = it_b->second;
    rep.delta_a_uev.push_back(depth);
    rep.alpha_over_alpha_m_hz.push_back(fitted);
    rep.release_baseline_hz.push_back(measured);
    rep.ratio.push_back(measured != 0.0 ? fitted / measured : 0.0);
    ss += (fitted - measured) * (fitted - measured);
    mean_b += measured;
    ++it_b;
  }
  const auto n = static_cast<double>(alpha_m.size());
  mean_b /= n;
  rep.nrms = mean_b != 0.0 ? std::sqrt(ss / n) / mean_b : 0.0;
  rep.flagged = rep.nrms > threshold;
  return rep;
}

}  // namespace qptrap::fit
