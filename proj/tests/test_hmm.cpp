// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "qptrap/errors.hpp"
#include "qptrap/hmm.hpp"
#include "qptrap/simulate.hpp"

using namespace qptrap;

namespace {

constexpr double inv_e = 0.36787944117144233;

Record telegraph_record(double t01, double t10, double f_s, double duration_s, double snr_target,
                        std::uint64_t seed) {
  const std::vector<double> trans = {1.0 - t01, t01, t10, 1.0 - t10};
  const auto chain = sim::simulate_states_discrete(trans, 2, f_s, duration_s, seed);
  sim::EmissionPlan plan;
  const double power = -133.0 + 10.0 * std::log10(snr_target / 9.0);
  return sim::emit_iq(chain, plan.emissions_at(power, 2), seed + 1);
}

// Joint log-probability of an explicit state path under a model.
double path_log_prob(const hmm::HmmModel& m, const Record& r,
                     const std::vector<std::uint8_t>& path) {
  const int k = m.n_states;
  double lp = std::log(m.initial[path[0]]);
  for (std::size_t t = 1; t < path.size(); ++t)
    lp += std::log(m.trans[static_cast<std::size_t>(path[t - 1]) * k + path[t]]);
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto& e = m.emissions[path[t]];
    const double di = r.iq[2 * t] - e.center_i;
    const double dq = r.iq[2 * t + 1] - e.center_q;
    lp += -std::log(2.0 * M_PI * e.sigma_i * e.sigma_q) -
          di * di / (2.0 * e.sigma_i * e.sigma_i) - dq * dq / (2.0 * e.sigma_q * e.sigma_q);
  }
  return lp;
}

}  // namespace

TEST_CASE("poisson link between probabilities and rates") {
  CHECK(hmm::transition_prob_from_rate(1e5, 1e6) ==
        doctest::Approx(0.1 * std::exp(-0.1)).epsilon(1e-14));
  CHECK(hmm::transition_prob_from_rate(1e5, 1e6) == doctest::Approx(0.0905).epsilon(2e-3));
  CHECK(hmm::transition_prob_from_rate(1e6, 1e6) == doctest::Approx(inv_e).epsilon(1e-14));
  CHECK(hmm::transition_prob_from_rate(0.9e6, 1e6) < inv_e);
  CHECK(hmm::transition_prob_from_rate(1.1e6, 1e6) < inv_e);
  CHECK(hmm::transition_prob_from_rate(0.0, 1e6) == 0.0);
  CHECK_THROWS_AS(hmm::transition_prob_from_rate(-1.0, 1e6), ConfigError);

  // Round-trip identity across the identifiable range.
  for (double ratio : {1e-6, 1e-3, 0.1, 0.5, 1.0}) {
    const double f_s = 1e6;
    const double gamma = ratio * f_s;
    const double t = hmm::transition_prob_from_rate(gamma, f_s);
    const std::vector<double> trans = {1.0 - t, t, t, 1.0 - t};
    const auto rates = hmm::rates_from_transition_matrix(trans, 2, f_s);
    CHECK(rates[1] == doctest::Approx(gamma).epsilon(1e-10));
    CHECK(rates[2] == doctest::Approx(gamma).epsilon(1e-10));
    CHECK(rates[0] == 0.0);
    CHECK(rates[3] == 0.0);
  }

  // Worked inversion: T = 0.1 at 1 MHz.
  const std::vector<double> trans = {0.9, 0.1, 0.1, 0.9};
  const auto rates = hmm::rates_from_transition_matrix(trans, 2, 1e6);
  CHECK(rates[1] == doctest::Approx(111.83e3).epsilon(1e-4));

  // Just over the branch point clamps to f_s; far over throws.
  const double t_edge = inv_e + 5e-10;
  const auto edge =
      hmm::rates_from_transition_matrix({1.0 - t_edge, t_edge, 0.1, 0.9}, 2, 1e6);
  CHECK(edge[1] == doctest::Approx(1e6).epsilon(1e-9));
  const double t_over = inv_e + 1e-6;
  CHECK_THROWS_AS(hmm::rates_from_transition_matrix({1.0 - t_over, t_over, 0.1, 0.9}, 2, 1e6),
                  IdentifiabilityError);
}

TEST_CASE("mode lifetimes") {
  const auto lt = hmm::mode_lifetimes({inv_e, 1.0 - inv_e, 1e-3, 0.999}, 2, 1e6);
  CHECK(lt[0] == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(lt[1] == doctest::Approx(0.9995e-3).epsilon(1e-3));

  const auto frozen = hmm::mode_lifetimes({1.0, 0.0, 0.0, 1.0}, 2, 1e6);
  CHECK(std::isinf(frozen[0]));
  CHECK(std::isinf(frozen[1]));

  CHECK_THROWS_AS(hmm::mode_lifetimes({0.0, 1.0, 1.0, 0.0}, 2, 1e6), ConfigError);
}

TEST_CASE("em fit is monotone and recovers the generator") {
  const Record rec = telegraph_record(0.001, 0.005, 1e6, 3.0, 9.0, 401);
  hmm::FitInfo info;
  const hmm::HmmModel m = hmm::fit_hmm(rec, 2, {}, {}, &info);

  REQUIRE(info.ll_history.size() >= 2);
  for (std::size_t i = 0; i + 1 < info.ll_history.size(); ++i)
    CHECK(info.ll_history[i + 1] >=
          info.ll_history[i] - 1e-8 * std::max(1.0, std::fabs(info.ll_history[i])));
  CHECK(info.converged);

  // Identify which fitted state is the low-I generator state 0.
  const int lo = m.emissions[0].center_i <= m.emissions[1].center_i ? 0 : 1;
  const int hi = 1 - lo;
  const double t01 = m.trans[static_cast<std::size_t>(lo) * 2 + hi];
  const double t10 = m.trans[static_cast<std::size_t>(hi) * 2 + lo];
  CHECK(t01 == doctest::Approx(0.001).epsilon(0.05));
  CHECK(t10 == doctest::Approx(0.005).epsilon(0.05));

  // Separation 3 at unit width; centers land within 3 sigma / sqrt(N_k).
  const double n0 = info.state_mass[lo];
  const double n1 = info.state_mass[hi];
  CHECK(std::fabs(m.emissions[lo].center_i - 0.0) < 3.0 / std::sqrt(n0));
  CHECK(std::fabs(m.emissions[hi].center_i - 3.0) < 3.0 / std::sqrt(n1));
  CHECK(std::fabs(m.emissions[lo].center_q) < 3.0 / std::sqrt(n0));
  CHECK(std::fabs(m.emissions[hi].center_q) < 3.0 / std::sqrt(n1));
  CHECK(m.emissions[lo].sigma_i == doctest::Approx(1.0).epsilon(0.01));
  CHECK(m.emissions[hi].sigma_q == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("viterbi decoding") {
  // Noise-free samples sit exactly on the centers; decoding is exact.
  const std::vector<double> trans = {0.999, 0.001, 0.005, 0.995};
  const auto chain = sim::simulate_states_discrete(trans, 2, 1e6, 0.3, 11);
  std::vector<GaussianEmission> sharp(2);
  sharp[0] = {0.0, 0.0, 0.0, 0.0};
  sharp[1] = {3.0, 0.0, 0.0, 0.0};
  const Record clean = sim::emit_iq(chain, sharp, 12);

  // Width 0.5 keeps the per-sample emission gap above the transition
  // detour cost, so even one-sample dwells survive the MAP path.
  hmm::HmmModel model;
  model.n_states = 2;
  model.trans = trans;
  model.initial = {5.0 / 6.0, 1.0 / 6.0};
  model.f_s = 1e6;
  model.emissions.resize(2);
  model.emissions[0] = {0.0, 0.0, 0.5, 0.5};
  model.emissions[1] = {3.0, 0.0, 0.5, 0.5};

  double lp = 0.0;
  const StateSequence decoded = hmm::viterbi(model, clean, &lp);
  REQUIRE(decoded.size() == chain.size());
  std::size_t mismatch = 0;
  for (std::size_t t = 0; t < chain.size(); ++t)
    if (decoded.states[t] != chain.states[t]) ++mismatch;
  CHECK(mismatch == 0);

  // The reported joint log-probability matches a direct evaluation.
  CHECK(lp == doctest::Approx(path_log_prob(model, clean, decoded.states)).epsilon(1e-10));

  // At SNR 9 the decoded path disagrees with the truth on < 1% of samples.
  hmm::HmmModel model_n = model;
  model_n.emissions[0] = {0.0, 0.0, 1.0, 1.0};
  model_n.emissions[1] = {3.0, 0.0, 1.0, 1.0};
  sim::EmissionPlan plan;
  const Record noisy = sim::emit_iq(chain, plan.emissions_at(-133.0, 2), 13);
  double lp_noisy = 0.0;
  const StateSequence dec2 = hmm::viterbi(model_n, noisy, &lp_noisy);
  mismatch = 0;
  for (std::size_t t = 0; t < chain.size(); ++t)
    if (dec2.states[t] != chain.states[t]) ++mismatch;
  CHECK(static_cast<double>(mismatch) / chain.size() < 0.01);

  // No single-state flip may improve the decoded path's joint probability.
  std::vector<std::uint8_t> path = dec2.states;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> pick(0, path.size() - 1);
  const double base = path_log_prob(model_n, noisy, path);
  CHECK(lp_noisy == doctest::Approx(base).epsilon(1e-10));
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = pick(rng);
    path[t] = static_cast<std::uint8_t>(1 - path[t]);
    CHECK(path_log_prob(model_n, noisy, path) <= base + 1e-9 * std::fabs(base));
    path[t] = static_cast<std::uint8_t>(1 - path[t]);
  }
}

TEST_CASE("single-cluster records collapse") {
  StateSequence states;
  states.f_s = 1e5;
  states.states.assign(100000, 0);
  std::vector<GaussianEmission> one(1);
  one[0] = {0.4, -0.1, 1.0, 1.0};
  const Record blob = sim::emit_iq(states, one, 12);

  CHECK_THROWS_AS(hmm::fit_hmm(blob, 2), StateCollapseError);

  // The gated analysis downgrades to a flagged one-state description
  // instead of throwing.
  hmm::AnalyzeOptions opt;
  opt.n_states = 2;
  const hmm::AnalysisResult r = hmm::analyze_record(blob, {}, opt);
  CHECK((r.flags & hmm::flag_state_collapsed) != 0);
  CHECK((r.flags & hmm::flag_gate_failure) != 0);
  CHECK(r.model.n_states == 1);
  CHECK(r.gamma_trap_hz == 0.0);
  CHECK(r.gamma_release_hz == 0.0);
  CHECK(r.model.emissions[0].center_i == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("analyze record at high snr") {
  const double g01 = 1000.0, g10 = 5000.0, f_s = 1e6;
  const double t01 = hmm::transition_prob_from_rate(g01, f_s);
  const double t10 = hmm::transition_prob_from_rate(g10, f_s);
  const std::vector<double> trans = {1.0 - t01, t01, t10, 1.0 - t10};
  const auto chain = sim::simulate_states_discrete(trans, 2, f_s, 1.0, 21);
  sim::EmissionPlan plan;
  Record rec = sim::emit_iq(chain, plan.emissions_at(-133.0, 2), 22);
  rec.meta.power_dbm = -133.0;

  hmm::AnalyzeOptions opt;
  opt.n_states = 2;
  const hmm::AnalysisResult r = hmm::analyze_record(rec, {}, opt);
  CHECK(r.flags == 0);
  CHECK(r.downsample_factor == 1);
  CHECK(r.effective_f_s == f_s);
  CHECK(r.achieved_snr == doctest::Approx(9.0).epsilon(0.15));
  CHECK(r.gamma_trap_hz == doctest::Approx(g01).epsilon(0.10));
  CHECK(r.gamma_release_hz == doctest::Approx(g10).epsilon(0.10));
  CHECK(r.n_bar == doctest::Approx(chain.mean_occupation()).epsilon(0.05));
  // States are relabeled so index 0 is the low-I mode.
  CHECK(r.model.emissions[0].center_i < r.model.emissions[1].center_i);
}

TEST_CASE("analyze record downsamples weak separation") {
  const double g01 = 200.0, g10 = 1000.0, f_s = 1e6;
  const double t01 = hmm::transition_prob_from_rate(g01, f_s);
  const double t10 = hmm::transition_prob_from_rate(g10, f_s);
  const auto chain =
      sim::simulate_states_discrete({1.0 - t01, t01, t10, 1.0 - t10}, 2, f_s, 2.0, 31);
  sim::EmissionPlan plan;
  const double power_snr15 = -133.0 + 10.0 * std::log10(1.5 / 9.0);
  const Record rec = sim::emit_iq(chain, plan.emissions_at(power_snr15, 2), 32);

  hmm::AnalyzeOptions opt;
  opt.n_states = 2;
  opt.snr_min = 3.0;
  const hmm::AnalysisResult r = hmm::analyze_record(rec, {}, opt);
  CHECK((r.flags & hmm::flag_gate_failure) == 0);
  CHECK(r.downsample_factor >= 2);
  CHECK(r.effective_f_s == doctest::Approx(f_s / r.downsample_factor));
  CHECK(r.achieved_snr >= opt.snr_min);
  CHECK(r.gamma_trap_hz == doctest::Approx(g01).epsilon(0.15));
  CHECK(r.gamma_release_hz == doctest::Approx(g10).epsilon(0.15));
}

TEST_CASE("analyze record flags an unresolvable gate conflict") {
  // Mode lifetimes near 3 samples forbid any downsampling. With a clean
  // fit (separation 9) and a gate demanding more, the lifetime guard
  // must reject the first halving and flag the conflict.
  const double f_s = 1e6;
  const double g = 0.4 * f_s;
  const double t = hmm::transition_prob_from_rate(g, f_s);
  const auto chain = sim::simulate_states_discrete({1.0 - t, t, t, 1.0 - t}, 2, f_s, 0.4, 41);
  sim::EmissionPlan plan;
  const Record rec = sim::emit_iq(chain, plan.emissions_at(-133.0, 2), 42);

  hmm::AnalyzeOptions opt;
  opt.n_states = 2;
  opt.snr_min = 20.0;
  const hmm::AnalysisResult r = hmm::analyze_record(rec, {}, opt);
  CHECK((r.flags & hmm::flag_gate_failure) != 0);
  CHECK(r.downsample_factor == 1);
  CHECK(r.achieved_snr < opt.snr_min);
  CHECK(r.achieved_snr == doctest::Approx(9.0).epsilon(0.2));

  CHECK_THROWS_AS(hmm::analyze_record(Record{}, {}, opt), ConfigError);
  hmm::AnalyzeOptions bad;
  bad.n_states = 1;
  CHECK_THROWS_AS(hmm::analyze_record(rec, {}, bad), ConfigError);
}

TEST_CASE("bootstrap walks powers downward") {
  const double g01 = 1000.0, g10 = 5000.0, f_s = 1e6;
  const double t01 = hmm::transition_prob_from_rate(g01, f_s);
  const double t10 = hmm::transition_prob_from_rate(g10, f_s);
  const std::vector<double> trans = {1.0 - t01, t01, t10, 1.0 - t10};
  sim::EmissionPlan plan;

  std::vector<Record> records;
  int i = 0;
  for (double target : {12.0, 6.0, 3.0}) {
    const auto chain = sim::simulate_states_discrete(trans, 2, f_s, 1.0, 100 + i);
    const double power = -133.0 + 10.0 * std::log10(target / 9.0);
    Record r = sim::emit_iq(chain, plan.emissions_at(power, 2), 200 + i);
    r.meta.power_dbm = power;
    records.push_back(std::move(r));
    ++i;
  }
  // Shuffle the input order; the chain must sort by power itself.
  std::swap(records[0], records[2]);

  hmm::AnalyzeOptions opt;
  opt.n_states = 2;
  const auto chainres = hmm::bootstrap_powers(records, opt);
  REQUIRE(chainres.size() == 3);
  for (std::size_t k = 0; k < chainres.size(); ++k) {
    CHECK((chainres[k].flags & hmm::flag_gate_failure) == 0);
    CHECK(chainres[k].gamma_trap_hz == doctest::Approx(g01).epsilon(0.10));
    CHECK(chainres[k].gamma_release_hz == doctest::Approx(g10).epsilon(0.10));
  }
  CHECK(chainres[0].achieved_snr > chainres[1].achieved_snr);
  CHECK(chainres[1].achieved_snr > chainres[2].achieved_snr);

  // A hopeless record stops the chain; later records are never analyzed.
  const double g_fast = 0.4 * f_s;
  const double tf = hmm::transition_prob_from_rate(g_fast, f_s);
  const auto fast = sim::simulate_states_discrete({1.0 - tf, tf, tf, 1.0 - tf}, 2, f_s, 0.4, 55);
  const double power_low = -133.0 + 10.0 * std::log10(0.5 / 9.0);
  Record dead = sim::emit_iq(fast, plan.emissions_at(power_low, 2), 56);
  dead.meta.power_dbm = power_low;

  std::vector<Record> mixed;
  mixed.push_back(records[2]);  // snr 12 after the swap above
  mixed.push_back(std::move(dead));
  mixed.push_back(records[1]);  // snr 6, but must never be reached
  mixed[2].meta.power_dbm = power_low - 5.0;
  const auto partial = hmm::bootstrap_powers(mixed, opt);
  REQUIRE(partial.size() == 2);
  CHECK((partial[0].flags & hmm::flag_gate_failure) == 0);
  CHECK((partial[1].flags & hmm::flag_gate_failure) != 0);
}
