// SPDX-License-Identifier: Apache-2.0

#include "qptrap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <thread>
#include <tuple>
#include <utility>

#include "qptrap/errors.hpp"
#include "qptrap/hmm.hpp"
#include "qptrap/physics.hpp"
#include "qptrap/simulate.hpp"

namespace qptrap::pipe {

namespace fs = std::filesystem;

namespace {

sim::SweepSpec build_sweep_spec(const cfg::PipelineConfig& c) {
  sim::SweepSpec s;
  s.temperatures_k = c.grid.temperatures_k;
  s.fluxes = c.grid.fluxes;
  s.powers_dbm = c.grid.powers_dbm;
  s.segments = c.grid.segments;
  s.trap.beta_mhz_per_ev3 = c.physics.beta_mhz_per_ev3;
  s.trap.x_ne = c.physics.x_ne;
  s.trap.gap_uev = c.physics.gap_uev;
  s.alpha_mhz_per_k3 = c.physics.alpha_mhz_per_k3;
  s.gamma_ro = c.physics.gamma_ro;
  s.plan.sigma_v = c.simulator.emission.sigma_v;
  s.plan.snr_ref = c.simulator.emission.snr_ref;
  s.plan.power_ref_dbm = c.simulator.emission.power_ref_dbm;
  s.f_s = c.simulator.f_s_hz;
  s.duration_s = c.simulator.duration_s;
  s.mode = c.simulator.mode == "discrete" ? sim::GeneratorMode::discrete
                                          : sim::GeneratorMode::ctmc;
  s.n_states = 2;
  s.base_seed = c.seed;
  return s;
}

struct GridCoord {
  std::size_t ti = 0;
  std::size_t fi = 0;
  std::size_t pi = 0;
  int seg = 0;
};

// Mirrors the generation order of synthesize_sweep so records can be
// named by their grid coordinates.
std::vector<GridCoord> grid_coords(const sim::SweepSpec& spec) {
  std::vector<GridCoord> out;
  const std::size_t n_p = std::max<std::size_t>(spec.powers_dbm.size(), 1);
  for (std::size_t ti = 0; ti < spec.temperatures_k.size(); ++ti) {
    const int segs = spec.segments.empty()
                         ? 1
                         : spec.segments.size() == 1 ? spec.segments[0]
                                                     : spec.segments.at(ti);
    for (std::size_t fi = 0; fi < spec.fluxes.size(); ++fi)
      for (std::size_t pi = 0; pi < n_p; ++pi)
        for (int seg = 0; seg < segs; ++seg) out.push_back({ti, fi, pi, seg});
  }
  return out;
}

std::string record_name(const GridCoord& c) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "rec_t%02zu_f%02zu_p%02zu_s%02d.absr", c.ti, c.fi, c.pi,
                c.seg);
  return buf;
}

fit::SweepRow row_from_result(const io::ManifestEntry& e, const hmm::AnalysisResult& res,
                              double gap_uev) {
  fit::SweepRow r;
  r.t_k = e.t_k;
  r.flux = e.flux;
  r.delta_a_uev = phys::trap_depth(e.flux, gap_uev);
  r.gamma_trap_hz = res.gamma_trap_hz;
  r.gamma_release_hz = res.gamma_release_hz;
  r.n_bar = res.n_bar;
  r.eff_fs_hz = res.effective_f_s;
  r.snr = res.achieved_snr;
  r.flags = res.flags;
  return r;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << io::format_double(row[i]);
    }
    out << "\n";
  }
  if (!out) throw IoError(path + ": write failed");
}

double estimate_or(const lsq::FitResult& r, std::size_t i, double fallback) {
  return i < r.estimates.size() ? r.estimates[i] : fallback;
}

}  // namespace

SimulateSummary cmd_simulate(const cfg::PipelineConfig& config, const std::string& out_dir) {
  const sim::SweepSpec spec = build_sweep_spec(config);
  const std::vector<GridCoord> coords = grid_coords(spec);

  const fs::path root(out_dir);
  const fs::path rec_dir = root / config.output.records_dir;
  std::error_code ec;
  fs::create_directories(rec_dir, ec);
  if (ec) throw IoError(rec_dir.string() + ": cannot create directory: " + ec.message());

  io::Manifest manifest;
  manifest.base_seed = config.seed;
  std::vector<fit::SweepRow> truth_rows;

  sim::synthesize_sweep(spec, [&](sim::SweepPoint&& pt) {
    const GridCoord& c = coords.at(pt.index);
    const fs::path rel = fs::path(config.output.records_dir) / record_name(c);
    io::write_record((root / rel).string(), pt.record);

    io::ManifestEntry e;
    e.file = rel.generic_string();
    e.t_k = pt.record.meta.temperature_k;
    e.flux = pt.record.meta.flux;
    e.power_dbm = pt.record.meta.power_dbm;
    e.segment = c.seg;
    e.seed = pt.record.meta.seed;
    manifest.entries.push_back(std::move(e));

    fit::SweepRow tr;
    tr.t_k = pt.record.meta.temperature_k;
    tr.flux = pt.record.meta.flux;
    tr.delta_a_uev = pt.delta_a_uev;
    tr.gamma_trap_hz = pt.gamma_trap_hz;
    tr.gamma_release_hz = pt.gamma_release_hz;
    tr.n_bar = pt.truth.mean_occupation();
    tr.eff_fs_hz = pt.record.f_s;
    tr.snr = pt.plan_snr;
    tr.flags = 0;
    truth_rows.push_back(tr);
  });

  SimulateSummary sum;
  sum.n_records = manifest.entries.size();
  sum.manifest_path = (root / config.output.manifest_json).string();
  sum.truth_path = (root / config.output.truth_csv).string();
  io::write_manifest(sum.manifest_path, manifest);
  io::write_dataset(sum.truth_path, truth_rows);
  return sum;
}

AnalyzeSummary analyze_manifest(const io::Manifest& manifest, const std::string& base_dir,
                                const cfg::PipelineConfig& config,
                                const std::string& dataset_path, int jobs) {
  // Chains: records sharing (T, flux), ordered by descending power with
  // manifest order breaking ties.
  std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    groups[{e.t_k, e.flux}].push_back(i);
  }
  std::vector<std::vector<std::size_t>> chains;
  chains.reserve(groups.size());
  for (auto& [key, idxs] : groups) {
    (void)key;
    std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      return manifest.entries[a].power_dbm > manifest.entries[b].power_dbm;
    });
    chains.push_back(std::move(idxs));
  }

  const hmm::AnalyzeOptions opt = config.analyze_options();
  const fs::path base(base_dir);
  std::vector<fit::SweepRow> rows(manifest.entries.size());

  auto run_chain = [&](const std::vector<std::size_t>& chain) {
    std::optional<hmm::HmmModel> carry;
    for (std::size_t idx : chain) {
      const io::ManifestEntry& e = manifest.entries[idx];
      const Record rec = io::read_record((base / e.file).string());
      const hmm::AnalysisResult res = hmm::analyze_record(rec, carry, opt);
      const bool clean = (res.flags & (hmm::flag_gate_failure | hmm::flag_state_collapsed)) == 0;
      if (clean && res.model.n_states == opt.n_states)
        carry = res.model;
      else
        carry.reset();
      rows[idx] = row_from_result(e, res, config.physics.gap_uev);
    }
  };

  const int n_workers = static_cast<int>(
      std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(chains.size(), 1)));
  if (n_workers <= 1) {
    for (const auto& chain : chains) run_chain(chain);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (;;) {
            const std::size_t ci = next.fetch_add(1);
            if (ci >= chains.size()) break;
            run_chain(chains[ci]);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  AnalyzeSummary sum;
  sum.n_rows = rows.size();
  for (const auto& r : rows)
    if (r.flags != 0) ++sum.n_flagged;
  sum.dataset_path = dataset_path;
  io::write_dataset(dataset_path, rows);
  return sum;
}

AnalyzeSummary cmd_analyze(const std::string& manifest_path, const cfg::PipelineConfig& config,
                           const std::string& dataset_path, int jobs) {
  const io::Manifest manifest = io::read_manifest(manifest_path);
  const std::string base = fs::path(manifest_path).parent_path().string();
  return analyze_manifest(manifest, base.empty() ? "." : base, config, dataset_path, jobs);
}

io::FitReport cmd_fit(const std::string& dataset_path, const cfg::PipelineConfig& config,
                      const std::string& report_path) {
  const std::vector<fit::SweepRow> raw = io::read_dataset(dataset_path);
  const fit::SweepDataset ds = fit::aggregate(raw);
  fit::FittingConfig fc = config.fitting;
  if (fc.record_duration_s <= 0.0) fc.record_duration_s = config.simulator.duration_s;

  io::FitReport rep;
  auto warn = [&](const std::string& w) { rep.warnings.push_back(w); };
  if (ds.rows.empty()) warn("dataset has no unflagged rows; nothing to fit");

  bool have_trap0 = false, have_release0 = false, have_nbar0 = false;
  try {
    rep.trap0 = fit::low_t_baseline(ds, fc.trap_baseline_t_max_k, fit::Quantity::trap_rate);
    have_trap0 = true;
  } catch (const std::exception& e) {
    warn(std::string("trap baseline: ") + e.what());
  }
  try {
    rep.release0 =
        fit::low_t_baseline(ds, fc.release_baseline_t_max_k, fit::Quantity::release_rate);
    have_release0 = true;
  } catch (const std::exception& e) {
    warn(std::string("release baseline: ") + e.what());
  }
  try {
    rep.nbar0 =
        fit::low_t_baseline(ds, fc.nbar_baseline_t_max_k, fit::Quantity::mean_occupation);
    have_nbar0 = true;
  } catch (const std::exception& e) {
    warn(std::string("occupation baseline: ") + e.what());
  }

  double gap_uev = config.physics.gap_uev;
  double x_ne = config.physics.x_ne;
  if (have_trap0) {
    try {
      rep.trap_stage1 = fit::fit_trap_stage1(ds, rep.trap0, fc);
      if (rep.trap_stage1.status == lsq::FitStatus::converged) {
        gap_uev = rep.trap_stage1.estimates.at(1);
      } else {
        warn(std::string("trap stage 1: ") + lsq::to_string(rep.trap_stage1.status) +
             "; keeping configured gap");
      }
    } catch (const std::exception& e) {
      warn(std::string("trap stage 1 failed: ") + e.what());
    }
    try {
      rep.trap_stage2 = fit::fit_trap_stage2(ds, rep.trap0, gap_uev, fc);
      if (rep.trap_stage2.status == lsq::FitStatus::converged) {
        x_ne = rep.trap_stage2.estimates.at(0);
      } else {
        warn(std::string("trap stage 2: ") + lsq::to_string(rep.trap_stage2.status) +
             "; keeping configured x_ne");
      }
    } catch (const std::exception& e) {
      warn(std::string("trap stage 2 failed: ") + e.what());
    }
  } else {
    warn("trap-rate fits skipped: no trap baseline");
  }

  if (have_release0) {
    try {
      rep.release = fit::fit_release(ds, rep.release0, fc);
      if (rep.release.status != lsq::FitStatus::converged)
        warn(std::string("release fit: ") + lsq::to_string(rep.release.status));
    } catch (const std::exception& e) {
      warn(std::string("release fit failed: ") + e.what());
    }
  } else {
    warn("release fit skipped: no release baseline");
  }

  if (have_nbar0) {
    try {
      rep.alpha_m = fit::fit_mean_occupation(ds, rep.nbar0, x_ne, gap_uev, fc);
      for (const auto& [depth, r] : rep.alpha_m)
        if (r.status != lsq::FitStatus::converged)
          warn("occupation fit at depth " + io::format_double(depth) + " ueV: " +
               lsq::to_string(r.status));
    } catch (const std::exception& e) {
      warn(std::string("occupation fits failed: ") + e.what());
    }
  } else {
    warn("occupation fits skipped: no occupation baseline");
  }

  if (have_release0 && !rep.alpha_m.empty() && !rep.release.estimates.empty()) {
    try {
      rep.consistency = fit::consistency_check(rep.release, rep.alpha_m, rep.release0);
    } catch (const std::exception& e) {
      warn(std::string("consistency check failed: ") + e.what());
    }
  } else {
    warn("consistency check skipped: missing release fit, occupation fits, or baseline");
  }

  io::write_fit_report(report_path, rep);
  return rep;
}

std::vector<std::string> cmd_report(const std::string& report_path,
                                    const std::string& dataset_path,
                                    const cfg::PipelineConfig& config,
                                    const std::string& out_dir) {
  const io::FitReport rep = io::read_fit_report(report_path);
  const std::vector<fit::SweepRow> raw = io::read_dataset(dataset_path);
  const fit::SweepDataset ds = fit::aggregate(raw);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir + ": cannot create directory: " + ec.message());
  const fs::path root(out_dir);
  std::vector<std::string> files;

  phys::TrapModelParams trap;
  trap.beta_mhz_per_ev3 = estimate_or(rep.trap_stage1, 0, config.physics.beta_mhz_per_ev3);
  trap.gap_uev = estimate_or(rep.trap_stage1, 1, config.physics.gap_uev);
  trap.x_ne = estimate_or(rep.trap_stage2, 0, config.physics.x_ne);
  const double alpha = estimate_or(rep.release, 0, config.physics.alpha_mhz_per_k3);

  {
    std::vector<std::vector<double>> rows;
    for (const auto& r : ds.rows)
      rows.push_back({r.t_k, r.delta_a_uev, r.gamma_trap_hz,
                      phys::trap_rate(r.delta_a_uev, r.t_k, trap)});
    std::sort(rows.begin(), rows.end());
    const std::string path = (root / "trap_vs_depth.csv").string();
    write_csv(path, "T_K,delta_a_ueV,gamma_trap_meas_Hz,gamma_trap_model_Hz", rows);
    files.push_back(path);
  }

  {
    std::vector<std::vector<double>> rows;
    for (const auto& r : ds.rows) {
      const auto rel0 = rep.release0.find(r.delta_a_uev);
      const double base = rel0 != rep.release0.end() ? rel0->second : 0.0;
      rows.push_back({r.delta_a_uev, r.t_k, r.gamma_trap_hz,
                      phys::trap_rate(r.delta_a_uev, r.t_k, trap), r.gamma_release_hz,
                      base + phys::phonon_release_rate(r.delta_a_uev, r.t_k, alpha)});
    }
    std::sort(rows.begin(), rows.end());
    const std::string path = (root / "rates_vs_T.csv").string();
    write_csv(path,
              "delta_a_ueV,T_K,gamma_trap_meas_Hz,gamma_trap_model_Hz,"
              "gamma_release_meas_Hz,gamma_release_model_Hz",
              rows);
    files.push_back(path);
  }

  {
    std::vector<std::vector<double>> rows;
    for (const auto& r : ds.rows) {
      const auto n0 = rep.nbar0.find(r.delta_a_uev);
      const auto am = rep.alpha_m.find(r.delta_a_uev);
      const double norm =
          (n0 != rep.nbar0.end() && n0->second > 0.0) ? r.n_bar / n0->second : std::nan("");
      const double model =
          (am != rep.alpha_m.end() && !am->second.estimates.empty())
              ? phys::normalized_mean_occupation(r.delta_a_uev, r.t_k, trap.x_ne, trap.gap_uev,
                                                 am->second.estimates[0])
              : std::nan("");
      rows.push_back({r.delta_a_uev, r.t_k, r.n_bar, norm, model});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) {
                return std::tie(a[0], a[1]) < std::tie(b[0], b[1]);
              });
    const std::string path = (root / "nbar_vs_T.csv").string();
    write_csv(path, "delta_a_ueV,T_K,n_bar_meas,n_bar_norm_meas,n_bar_norm_model", rows);
    files.push_back(path);
  }

  {
    // Dense model curves sampled at 1 mK over the sweep's span.
    std::vector<std::vector<double>> rows;
    for (const auto& [depth, am] : rep.alpha_m) {
      if (am.estimates.empty()) continue;
      for (int mk = 30; mk <= 300; ++mk) {
        const double t = mk * 1e-3;
        rows.push_back({depth, t,
                        phys::normalized_mean_occupation(depth, t, trap.x_ne, trap.gap_uev,
                                                         am.estimates[0])});
      }
    }
    const std::string path = (root / "nbar_curves.csv").string();
    write_csv(path, "delta_a_ueV,T_K,n_bar_norm_model", rows);
    files.push_back(path);
  }

  {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < rep.consistency.delta_a_uev.size(); ++i)
      rows.push_back({rep.consistency.delta_a_uev[i], rep.consistency.release_baseline_hz[i],
                      rep.consistency.alpha_over_alpha_m_hz[i]});
    const std::string path = (root / "consistency.csv").string();
    write_csv(path, "delta_a_ueV,gamma_release0_Hz,alpha_over_alpha_m_Hz", rows);
    files.push_back(path);
  }

  return files;
}

PipelineSummary run_pipeline(const cfg::PipelineConfig& config, const std::string& out_dir,
                             int jobs) {
  PipelineSummary sum;
  sum.simulate = cmd_simulate(config, out_dir);
  const fs::path root(out_dir);
  sum.analyze = cmd_analyze(sum.simulate.manifest_path, config,
                            (root / config.output.dataset_csv).string(), jobs);
  sum.report_path = (root / config.output.report_json).string();
  cmd_fit(sum.analyze.dataset_path, config, sum.report_path);
  sum.plot_files = cmd_report(sum.report_path, sum.analyze.dataset_path, config,
                              (root / config.output.plots_dir).string());
  return sum;
}

}  // namespace qptrap::pipe
