// SPDX-License-Identifier: Apache-2.0

#include "qptrap/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qptrap/errors.hpp"
#include "qptrap/kernels.hpp"
#include "qptrap/simulate.hpp"
#include "qptrap/specfun.hpp"

namespace qptrap::hmm {

namespace {

constexpr double k_sigma_floor = 1e-6;   // volts; keeps log densities finite
constexpr double k_initial_floor = 1e-12;

std::vector<kernels::EmissionNat> nat_params(const HmmModel& m) {
  std::vector<kernels::EmissionNat> nat(m.n_states);
  for (int k = 0; k < m.n_states; ++k) {
    const GaussianEmission& e = m.emissions[k];
    const double si = std::max(e.sigma_i, k_sigma_floor);
    const double sq = std::max(e.sigma_q, k_sigma_floor);
    nat[k].center_i = e.center_i;
    nat[k].center_q = e.center_q;
    nat[k].inv_two_var_i = 1.0 / (2.0 * si * si);
    nat[k].inv_two_var_q = 1.0 / (2.0 * sq * sq);
    nat[k].log_norm = -std::log(2.0 * 3.14159265358979323846 * si * sq);
  }
  return nat;
}

void validate_model(const HmmModel& m) {
  if (m.n_states < 1) throw ConfigError("model needs at least one state");
  const auto k = static_cast<std::size_t>(m.n_states);
  if (m.trans.size() != k * k || m.emissions.size() != k || m.initial.size() != k)
    throw ConfigError("model field sizes do not match n_states");
}

double median_of(std::vector<float>& scratch) {
  const std::size_t mid = scratch.size() / 2;
  std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
  return scratch[mid];
}

// Deterministic initialization from the data: project onto the principal
// IQ axis, then either split at projection quantiles (balanced data) or
// peel the skew-side tail off a robust majority center (asymmetric
// telegraph data). No randomness, so fits are reproducible.
HmmModel neutral_init(const Record& record, int k_states) {
  const std::size_t n = record.size();
  if (n < static_cast<std::size_t>(8 * k_states))
    throw StateCollapseError("record too short to seed " + std::to_string(k_states) + " states");
  const float* iq = record.iq.data();

  double mi = 0.0, mq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    mi += iq[2 * t];
    mq += iq[2 * t + 1];
  }
  mi /= static_cast<double>(n);
  mq /= static_cast<double>(n);
  double cii = 0.0, cqq = 0.0, ciq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double di = iq[2 * t] - mi;
    const double dq = iq[2 * t + 1] - mq;
    cii += di * di;
    cqq += dq * dq;
    ciq += di * dq;
  }
  cii /= static_cast<double>(n);
  cqq /= static_cast<double>(n);
  ciq /= static_cast<double>(n);

  // Leading eigenvector of the 2x2 covariance.
  double ei = 1.0, eq = 0.0;
  const double lam = 0.5 * (cii + cqq + std::sqrt((cii - cqq) * (cii - cqq) + 4.0 * ciq * ciq));
  if (std::fabs(ciq) > 1e-30) {
    ei = ciq;
    eq = lam - cii;
    const double norm = std::hypot(ei, eq);
    ei /= norm;
    eq /= norm;
  } else if (cqq > cii) {
    ei = 0.0;
    eq = 1.0;
  }

  std::vector<float> proj(n);
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double p = (iq[2 * t] - mi) * ei + (iq[2 * t + 1] - mq) * eq;
    proj[t] = static_cast<float>(p);
    s1 += p;
    s2 += p * p;
    s3 += p * p * p;
  }
  const double pm = s1 / static_cast<double>(n);
  const double pvar = std::max(s2 / static_cast<double>(n) - pm * pm, 1e-30);
  const double skew =
      (s3 / static_cast<double>(n) - 3.0 * pm * pvar - pm * pm * pm) / std::pow(pvar, 1.5);

  HmmModel m;
  m.n_states = k_states;
  m.f_s = record.f_s;
  m.emissions.resize(k_states);
  m.trans.assign(static_cast<std::size_t>(k_states) * k_states,
                 k_states > 1 ? 0.001 / (k_states - 1) : 0.0);
  for (int k = 0; k < k_states; ++k)
    m.trans[static_cast<std::size_t>(k) * k_states + k] = k_states > 1 ? 0.999 : 1.0;
  m.initial.assign(k_states, 1.0 / k_states);

  const bool asymmetric = std::fabs(skew) > 0.2 && k_states > 1;
  if (asymmetric) {
    // Majority center from channel medians, width from the median
    // absolute deviation, second center from the skew-side tail.
    std::vector<float> scratch(n);
    for (std::size_t t = 0; t < n; ++t) scratch[t] = iq[2 * t];
    const double med_i = median_of(scratch);
    for (std::size_t t = 0; t < n; ++t) scratch[t] = iq[2 * t + 1];
    const double med_q = median_of(scratch);
    for (std::size_t t = 0; t < n; ++t)
      scratch[t] = std::fabs(proj[t] - static_cast<float>(pm));
    const double mad = median_of(scratch);
    const double sig_rob = std::max(1.4826 * mad, 1e-12);

    const double side = skew > 0.0 ? 1.0 : -1.0;
    const double tau = pm + side * 2.5 * sig_rob;
    double fi = 0.0, fq = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (side * (proj[t] - tau) > 0.0f) {
        fi += iq[2 * t];
        fq += iq[2 * t + 1];
        ++count;
      }
    }
    if (count < std::max<std::size_t>(50, n / 50000))
      throw StateCollapseError("no second IQ cluster beyond the majority tail");
    const double c1i = fi / static_cast<double>(count);
    const double c1q = fq / static_cast<double>(count);

    m.emissions[0].center_i = med_i;
    m.emissions[0].center_q = med_q;
    for (int k = 1; k < k_states; ++k) {
      m.emissions[k].center_i = med_i + k * (c1i - med_i);
      m.emissions[k].center_q = med_q + k * (c1q - med_q);
    }
    for (int k = 0; k < k_states; ++k) {
      m.emissions[k].sigma_i = std::max(sig_rob, k_sigma_floor);
      m.emissions[k].sigma_q = std::max(sig_rob, k_sigma_floor);
    }
    return m;
  }

  // Balanced or single-cluster data: centers at projection quantiles,
  // sharpened by two Lloyd passes along the projection.
  std::vector<double> q(k_states);
  {
    std::vector<float> scratch(proj);
    for (int k = 0; k < k_states; ++k) {
      const std::size_t pos = static_cast<std::size_t>(
          std::min<double>(static_cast<double>(n) - 1.0, (k + 0.5) / k_states * static_cast<double>(n)));
      std::nth_element(scratch.begin(), scratch.begin() + pos, scratch.end());
      q[k] = scratch[pos];
    }
  }
  std::vector<double> sum_p(k_states), cnt(k_states);
  for (int pass = 0; pass < 2; ++pass) {
    std::fill(sum_p.begin(), sum_p.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double p = proj[t];
      int best = 0;
      double bd = std::fabs(p - q[0]);
      for (int k = 1; k < k_states; ++k) {
        const double d = std::fabs(p - q[k]);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      sum_p[best] += p;
      cnt[best] += 1.0;
    }
    for (int k = 0; k < k_states; ++k)
      if (cnt[k] > 0.0) q[k] = sum_p[k] / cnt[k];
  }
  std::vector<double> sum_i(k_states), sum_q(k_states), ss_i(k_states), ss_q(k_states);
  std::fill(cnt.begin(), cnt.end(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double p = proj[t];
    int best = 0;
    double bd = std::fabs(p - q[0]);
    for (int k = 1; k < k_states; ++k) {
      const double d = std::fabs(p - q[k]);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    sum_i[best] += iq[2 * t];
    sum_q[best] += iq[2 * t + 1];
    ss_i[best] += static_cast<double>(iq[2 * t]) * iq[2 * t];
    ss_q[best] += static_cast<double>(iq[2 * t + 1]) * iq[2 * t + 1];
    cnt[best] += 1.0;
  }
  double pooled_i = 0.0, pooled_q = 0.0;
  for (int k = 0; k < k_states; ++k) {
    if (cnt[k] > 0.0) {
      const double ci = sum_i[k] / cnt[k];
      const double cq = sum_q[k] / cnt[k];
      m.emissions[k].center_i = ci;
      m.emissions[k].center_q = cq;
      pooled_i += ss_i[k] - cnt[k] * ci * ci;
      pooled_q += ss_q[k] - cnt[k] * cq * cq;
    } else {
      m.emissions[k].center_i = mi + q[k] * ei;
      m.emissions[k].center_q = mq + q[k] * eq;
    }
  }
  const double si = std::max(std::sqrt(std::max(pooled_i / static_cast<double>(n), 0.0)), k_sigma_floor);
  const double sq = std::max(std::sqrt(std::max(pooled_q / static_cast<double>(n), 0.0)), k_sigma_floor);
  for (int k = 0; k < k_states; ++k) {
    m.emissions[k].sigma_i = si;
    m.emissions[k].sigma_q = sq;
  }
  return m;
}

// Scaled forward pass; returns the total log-likelihood. alpha holds the
// per-step-normalized forward variables, c the normalizers.
double forward_pass(const HmmModel& m, const double* b, const double* shift, std::size_t n,
                    double* alpha, double* c) {
  const int k_states = m.n_states;
  double ll = 0.0;
  double s = 0.0;
  for (int k = 0; k < k_states; ++k) {
    const double v = std::max(m.initial[k], k_initial_floor) * b[static_cast<std::size_t>(k) * n];
    alpha[static_cast<std::size_t>(k) * n] = v;
    s += v;
  }
  if (s <= 0.0) {
    for (int k = 0; k < k_states; ++k) alpha[static_cast<std::size_t>(k) * n] = 1.0 / k_states;
    s = 1e-300;
  }
  c[0] = s;
  ll += std::log(s) + shift[0];
  const double inv0 = 1.0 / s;
  for (int k = 0; k < k_states; ++k) alpha[static_cast<std::size_t>(k) * n] *= inv0;

  for (std::size_t t = 1; t < n; ++t) {
    s = 0.0;
    for (int k = 0; k < k_states; ++k) {
      double acc = 0.0;
      for (int j = 0; j < k_states; ++j)
        acc += alpha[static_cast<std::size_t>(j) * n + t - 1] *
               m.trans[static_cast<std::size_t>(j) * k_states + k];
      const double v = acc * b[static_cast<std::size_t>(k) * n + t];
      alpha[static_cast<std::size_t>(k) * n + t] = v;
      s += v;
    }
    if (s <= 0.0) {
      for (int k = 0; k < k_states; ++k) alpha[static_cast<std::size_t>(k) * n + t] = 1.0 / k_states;
      s = 1e-300;
    }
    c[t] = s;
    ll += std::log(s) + shift[t];
    const double inv = 1.0 / s;
    for (int k = 0; k < k_states; ++k) alpha[static_cast<std::size_t>(k) * n + t] *= inv;
  }
  return ll;
}

// Streaming backward pass: overwrites alpha with the posteriors gamma
// and accumulates the expected transition counts.
void backward_pass(const HmmModel& m, const double* b, std::size_t n, double* alpha,
                   const double* c, std::vector<double>& xi_sum) {
  const int k_states = m.n_states;
  std::vector<double> beta_next(k_states, 1.0);
  std::vector<double> beta_cur(k_states, 0.0);
  std::vector<double> bb(k_states, 0.0);
  std::fill(xi_sum.begin(), xi_sum.end(), 0.0);
  for (std::size_t t = n - 1; t-- > 0;) {
    const double invc = 1.0 / c[t + 1];
    for (int k = 0; k < k_states; ++k)
      bb[k] = b[static_cast<std::size_t>(k) * n + t + 1] * beta_next[k] * invc;
    for (int i = 0; i < k_states; ++i) {
      const double ai = alpha[static_cast<std::size_t>(i) * n + t];
      double acc = 0.0;
      for (int j = 0; j < k_states; ++j) {
        const double aij = m.trans[static_cast<std::size_t>(i) * k_states + j];
        xi_sum[static_cast<std::size_t>(i) * k_states + j] += ai * aij * bb[j];
        acc += aij * bb[j];
      }
      beta_cur[i] = acc;
    }
    for (int i = 0; i < k_states; ++i)
      alpha[static_cast<std::size_t>(i) * n + t] *= beta_cur[i];
    std::swap(beta_next, beta_cur);
  }
}

struct FitScratch {
  std::vector<double> logb, shift, alpha, c;
};

// Log-likelihood of the best single diagonal Gaussian over the record,
// available in closed form from the per-channel ML mean and variance.
double single_gaussian_ll(const Record& record) {
  const std::size_t n = record.size();
  double mi = 0.0, mq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    mi += record.iq[2 * t];
    mq += record.iq[2 * t + 1];
  }
  mi /= static_cast<double>(n);
  mq /= static_cast<double>(n);
  double vi = 0.0, vq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double di = record.iq[2 * t] - mi;
    const double dq = record.iq[2 * t + 1] - mq;
    vi += di * di;
    vq += dq * dq;
  }
  vi = std::max(vi / static_cast<double>(n), k_sigma_floor * k_sigma_floor);
  vq = std::max(vq / static_cast<double>(n), k_sigma_floor * k_sigma_floor);
  return -0.5 * static_cast<double>(n) *
         (std::log(2.0 * M_PI * vi) + std::log(2.0 * M_PI * vq) + 2.0);
}

// Free parameters of a k-state model: 4 emission values per state, the
// off-diagonal transition entries, and the initial distribution.
int free_params(int k) { return 4 * k + k * (k - 1) + (k - 1); }

HmmModel fit_hmm_impl(const Record& record, int k_states, const std::optional<HmmModel>& init,
                      const FitOptions& opt, FitInfo* info) {
  if (record.size() == 0) throw ConfigError("cannot fit an empty record");
  if (k_states < 1) throw ConfigError("n_states must be >= 1");
  if (init && init->n_states != k_states)
    throw ConfigError("init model state count does not match n_states");

  HmmModel model = init ? *init : neutral_init(record, k_states);
  validate_model(model);
  model.f_s = record.f_s;

  const std::size_t n = record.size();
  const float* iq = record.iq.data();
  FitScratch ws;
  ws.logb.resize(static_cast<std::size_t>(k_states) * n);
  ws.shift.resize(n);
  ws.alpha.resize(static_cast<std::size_t>(k_states) * n);
  ws.c.resize(n);
  std::vector<double> xi_sum(static_cast<std::size_t>(k_states) * k_states, 0.0);
  std::vector<kernels::MomentSums> moments(k_states);
  const double mass_floor = std::max(opt.mass_floor, 1e-9);

  double ll_prev = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;
  std::vector<double> history;
  std::vector<double> mass(k_states, 0.0);

  while (iter < opt.max_iter) {
    ++iter;
    const auto nat = nat_params(model);
    kernels::emission_loglik(iq, n, nat.data(), k_states, ws.logb.data());
    kernels::rowwise_max(ws.logb.data(), n, k_states, ws.shift.data());
    kernels::exp_shift(ws.logb.data(), ws.shift.data(), n, k_states, ws.logb.data());
    const double ll =
        forward_pass(model, ws.logb.data(), ws.shift.data(), n, ws.alpha.data(), ws.c.data());
    history.push_back(ll);
    backward_pass(model, ws.logb.data(), n, ws.alpha.data(), ws.c.data(), xi_sum);

    kernels::weighted_moments(ws.alpha.data(), iq, n, k_states, moments.data());
    for (int k = 0; k < k_states; ++k) {
      mass[k] = moments[k].w;
      if (!(moments[k].w >= mass_floor)) {
        if (info) {
          info->log_likelihood = ll;
          info->iterations = iter;
          info->converged = false;
          info->state_mass = mass;
          info->ll_history = history;
        }
        throw StateCollapseError("state " + std::to_string(k) + " responsibility mass " +
                                 std::to_string(moments[k].w) + " fell below the floor");
      }
    }
    for (int k = 0; k < k_states; ++k) {
      const double inv = 1.0 / moments[k].w;
      const double ci = moments[k].wi * inv;
      const double cq = moments[k].wq * inv;
      model.emissions[k].center_i = ci;
      model.emissions[k].center_q = cq;
      model.emissions[k].sigma_i =
          std::max(std::sqrt(std::max(moments[k].wii * inv - ci * ci, 0.0)), k_sigma_floor);
      model.emissions[k].sigma_q =
          std::max(std::sqrt(std::max(moments[k].wqq * inv - cq * cq, 0.0)), k_sigma_floor);
    }
    for (int i = 0; i < k_states; ++i) {
      double row = 0.0;
      for (int j = 0; j < k_states; ++j) row += xi_sum[static_cast<std::size_t>(i) * k_states + j];
      if (row > 0.0) {
        for (int j = 0; j < k_states; ++j)
          model.trans[static_cast<std::size_t>(i) * k_states + j] =
              xi_sum[static_cast<std::size_t>(i) * k_states + j] / row;
      }
    }
    double pi_total = 0.0;
    for (int k = 0; k < k_states; ++k) {
      model.initial[k] = std::max(ws.alpha[static_cast<std::size_t>(k) * n], k_initial_floor);
      pi_total += model.initial[k];
    }
    for (int k = 0; k < k_states; ++k) model.initial[k] /= pi_total;

    if (iter > 1 && std::fabs(ll - ll_prev) < opt.tol) {
      converged = true;
      ll_prev = ll;
      break;
    }
    ll_prev = ll;
  }

  if (info) {
    info->log_likelihood = ll_prev;
    info->iterations = iter;
    info->converged = converged;
    info->state_mass = mass;
    info->ll_history = history;
  }

  // A model whose extra states explain no more than chance over a single
  // Gaussian has not found k distinct modes. The BIC-scale margin stays
  // orders of magnitude below the gain from any real mode structure.
  if (k_states > 1) {
    const double gain = ll_prev - single_gaussian_ll(record);
    const double margin = 0.5 * static_cast<double>(free_params(k_states) - free_params(1)) *
                          std::log(static_cast<double>(n));
    if (gain < margin)
      throw StateCollapseError("log-likelihood gain " + std::to_string(gain) + " over one state is below the complexity margin " +
                               std::to_string(margin));
  }
  return model;
}

}  // namespace

HmmModel fit_hmm(const Record& record, int n_states, const std::optional<HmmModel>& init,
                 const FitOptions& opt, FitInfo* info) {
  return fit_hmm_impl(record, n_states, init, opt, info);
}

StateSequence viterbi(const HmmModel& model, const Record& record, double* path_log_prob) {
  validate_model(model);
  const std::size_t n = record.size();
  if (n == 0) throw ConfigError("cannot decode an empty record");
  const int k_states = model.n_states;

  std::vector<double> logb(static_cast<std::size_t>(k_states) * n);
  const auto nat = nat_params(model);
  kernels::emission_loglik(record.iq.data(), n, nat.data(), k_states, logb.data());

  std::vector<double> log_a(static_cast<std::size_t>(k_states) * k_states);
  for (std::size_t i = 0; i < log_a.size(); ++i) log_a[i] = std::log(model.trans[i]);
  std::vector<double> prev(k_states), cur(k_states);
  for (int k = 0; k < k_states; ++k)
    prev[k] = std::log(std::max(model.initial[k], k_initial_floor)) +
              logb[static_cast<std::size_t>(k) * n];

  std::vector<std::uint8_t> bp(static_cast<std::size_t>(k_states) * n);
  for (std::size_t t = 1; t < n; ++t) {
    for (int k = 0; k < k_states; ++k) {
      int arg = 0;
      double best = prev[0] + log_a[static_cast<std::size_t>(0) * k_states + k];
      for (int j = 1; j < k_states; ++j) {
        const double v = prev[j] + log_a[static_cast<std::size_t>(j) * k_states + k];
        if (v > best) {
          best = v;
          arg = j;
        }
      }
      cur[k] = best + logb[static_cast<std::size_t>(k) * n + t];
      bp[t * static_cast<std::size_t>(k_states) + k] = static_cast<std::uint8_t>(arg);
    }
    std::swap(prev, cur);
  }

  int last = 0;
  for (int k = 1; k < k_states; ++k)
    if (prev[k] > prev[last]) last = k;
  if (path_log_prob) *path_log_prob = prev[last];

  StateSequence out;
  out.f_s = record.f_s;
  out.states.resize(n);
  out.states[n - 1] = static_cast<std::uint8_t>(last);
  for (std::size_t t = n - 1; t-- > 0;) {
    last = bp[(t + 1) * static_cast<std::size_t>(k_states) + last];
    out.states[t] = static_cast<std::uint8_t>(last);
  }
  return out;
}

double transition_prob_from_rate(double gamma_hz, double f_s) {
  if (gamma_hz < 0.0) throw ConfigError("rate must be non-negative");
  if (f_s <= 0.0) throw ConfigError("sample rate must be positive");
  const double r = gamma_hz / f_s;
  return r * std::exp(-r);
}

std::vector<double> rates_from_transition_matrix(const std::vector<double>& trans, int n_states,
                                                 double f_s) {
  if (n_states < 1 || trans.size() != static_cast<std::size_t>(n_states) * n_states)
    throw ConfigError("transition matrix size does not match n_states");
  if (f_s <= 0.0) throw ConfigError("sample rate must be positive");
  const double inv_e = std::exp(-1.0);
  std::vector<double> rates(trans.size(), 0.0);
  for (int i = 0; i < n_states; ++i) {
    for (int j = 0; j < n_states; ++j) {
      if (i == j) continue;
      const double t = trans[static_cast<std::size_t>(i) * n_states + j];
      if (t < 0.0 || t > 1.0) throw ConfigError("transition probability outside [0,1]");
      if (t > inv_e + 1e-9)
        throw IdentifiabilityError("transition probability " + std::to_string(t) +
                                   " exceeds 1/e; the rate is not resolvable at f_s = " +
                                   std::to_string(f_s) + " Hz");
      const double tc = std::min(t, inv_e);
      rates[static_cast<std::size_t>(i) * n_states + j] =
          -f_s * specfun::lambert_w0(-tc);
    }
  }
  return rates;
}

std::vector<double> mode_lifetimes(const std::vector<double>& trans, int n_states, double f_s) {
  if (n_states < 1 || trans.size() != static_cast<std::size_t>(n_states) * n_states)
    throw ConfigError("transition matrix size does not match n_states");
  if (f_s <= 0.0) throw ConfigError("sample rate must be positive");
  std::vector<double> out(n_states);
  for (int i = 0; i < n_states; ++i) {
    const double tii = trans[static_cast<std::size_t>(i) * n_states + i];
    if (tii <= 0.0) throw ConfigError("diagonal transition probability must be positive");
    out[i] = tii >= 1.0 ? std::numeric_limits<double>::infinity() : -1.0 / (f_s * std::log(tii));
  }
  return out;
}

namespace {

// Two most responsibility-heavy states, by mass.
std::pair<int, int> top_two(const std::vector<double>& mass) {
  int a = 0, b = 1;
  if (mass.size() > 1 && mass[1] > mass[0]) std::swap(a, b);
  for (int k = 2; k < static_cast<int>(mass.size()); ++k) {
    if (mass[k] > mass[a]) {
      b = a;
      a = k;
    } else if (mass[k] > mass[b]) {
      b = k;
    }
  }
  return {a, b};
}

void relabel_ascending_i(AnalysisResult& r) {
  const int k_states = r.model.n_states;
  if (k_states < 2) return;
  std::vector<int> order(k_states);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return r.model.emissions[a].center_i < r.model.emissions[b].center_i;
  });
  bool identity = true;
  for (int k = 0; k < k_states; ++k) identity = identity && order[k] == k;
  if (identity) return;

  HmmModel m = r.model;
  std::vector<double> rates = r.rates_hz;
  for (int a = 0; a < k_states; ++a) {
    m.emissions[a] = r.model.emissions[order[a]];
    m.initial[a] = r.model.initial[order[a]];
    for (int b = 0; b < k_states; ++b) {
      m.trans[static_cast<std::size_t>(a) * k_states + b] =
          r.model.trans[static_cast<std::size_t>(order[a]) * k_states + order[b]];
      rates[static_cast<std::size_t>(a) * k_states + b] =
          r.rates_hz[static_cast<std::size_t>(order[a]) * k_states + order[b]];
    }
  }
  std::vector<std::uint8_t> new_label(k_states);
  for (int a = 0; a < k_states; ++a) new_label[order[a]] = static_cast<std::uint8_t>(a);
  for (std::uint8_t& s : r.decoded.states) s = new_label[s];
  r.model = std::move(m);
  r.rates_hz = std::move(rates);
}

AnalysisResult degenerate_result(const Record& record, int downsample_factor) {
  AnalysisResult r;
  const std::size_t n = record.size();
  double mi = 0.0, mq = 0.0, vi = 0.0, vq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    mi += record.iq[2 * t];
    mq += record.iq[2 * t + 1];
  }
  if (n > 0) {
    mi /= static_cast<double>(n);
    mq /= static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
      vi += (record.iq[2 * t] - mi) * (record.iq[2 * t] - mi);
      vq += (record.iq[2 * t + 1] - mq) * (record.iq[2 * t + 1] - mq);
    }
    vi /= static_cast<double>(n);
    vq /= static_cast<double>(n);
  }
  r.model.n_states = 1;
  r.model.trans = {1.0};
  r.model.initial = {1.0};
  r.model.f_s = record.f_s;
  GaussianEmission e;
  e.center_i = mi;
  e.center_q = mq;
  e.sigma_i = std::max(std::sqrt(vi), k_sigma_floor);
  e.sigma_q = std::max(std::sqrt(vq), k_sigma_floor);
  r.model.emissions = {e};
  r.decoded.f_s = record.f_s;
  r.decoded.states.assign(n, 0);
  r.rates_hz = {0.0};
  r.effective_f_s = record.f_s;
  r.downsample_factor = downsample_factor;
  r.flags = flag_state_collapsed | flag_gate_failure;
  return r;
}

}  // namespace

AnalysisResult analyze_record(const Record& record, const std::optional<HmmModel>& init,
                              const AnalyzeOptions& opt) {
  if (record.size() == 0) throw ConfigError("cannot analyze an empty record");
  if (opt.n_states < 2) throw ConfigError("analysis needs at least two states");

  Record working = record;
  int factor = 1;
  int steps = 0;
  std::uint32_t flags = 0;
  std::optional<HmmModel> cur_init = init;
  int k_states = opt.n_states;

  HmmModel model;
  FitInfo info;
  while (true) {
    bool fitted = false;
    try {
      model = fit_hmm(working, k_states, cur_init, opt.fit, &info);
      fitted = true;
    } catch (const StateCollapseError&) {
      if (cur_init) {
        cur_init.reset();
        continue;
      }
      if (k_states > 2) {
        --k_states;
        continue;
      }
      AnalysisResult r = degenerate_result(working, factor);
      r.flags |= flags;
      return r;
    }
    if (!fitted) continue;

    const auto [a, b] = top_two(info.state_mass);
    const double achieved = snr(model.emissions[a], model.emissions[b]);
    if (achieved >= opt.snr_min) break;

    const auto lifetimes = mode_lifetimes(model.trans, k_states, working.f_s);
    double lt_min = std::numeric_limits<double>::infinity();
    for (double lt : lifetimes) lt_min = std::min(lt_min, lt);
    const double next_fs = working.f_s / 2.0;
    const bool lifetime_ok = 1.0 / next_fs <= lt_min / 2.0;
    const bool size_ok = working.size() / 2 >= opt.min_samples;
    if (!lifetime_ok || !size_ok || steps >= opt.max_downsample_steps) {
      flags |= flag_gate_failure;
      break;
    }
    working = sim::boxcar_downsample(working, 2);
    factor *= 2;
    ++steps;
    cur_init.reset();  // the noise scale changed; reseed from the data
  }

  AnalysisResult r;
  r.model = model;
  r.log_likelihood = info.log_likelihood;
  if (!info.converged) flags |= flag_not_converged;
  if (k_states < opt.n_states) flags |= flag_state_collapsed;
  r.decoded = viterbi(model, working);
  try {
    r.rates_hz = rates_from_transition_matrix(model.trans, k_states, working.f_s);
  } catch (const IdentifiabilityError&) {
    flags |= flag_rate_unresolvable;
    const double inv_e = std::exp(-1.0);
    r.rates_hz.assign(model.trans.size(), 0.0);
    for (int i = 0; i < k_states; ++i) {
      for (int j = 0; j < k_states; ++j) {
        if (i == j) continue;
        const double t = std::min(model.trans[static_cast<std::size_t>(i) * k_states + j], inv_e);
        r.rates_hz[static_cast<std::size_t>(i) * k_states + j] =
            -working.f_s * specfun::lambert_w0(-t);
      }
    }
  }
  relabel_ascending_i(r);
  const auto [a, b] = top_two(info.state_mass);
  r.achieved_snr = snr(model.emissions[a], model.emissions[b]);
  r.gamma_trap_hz = r.rates_hz[1];
  r.gamma_release_hz = r.rates_hz[static_cast<std::size_t>(k_states)];
  r.n_bar = r.decoded.mean_occupation();
  r.effective_f_s = working.f_s;
  r.downsample_factor = factor;
  r.flags = flags;
  return r;
}

std::vector<AnalysisResult> bootstrap_powers(const std::vector<Record>& records,
                                             const AnalyzeOptions& opt) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].meta.power_dbm > records[b].meta.power_dbm;
  });

  std::vector<AnalysisResult> out;
  std::optional<HmmModel> carry;
  for (std::size_t idx : order) {
    AnalysisResult r = analyze_record(records[idx], carry, opt);
    const bool failed = (r.flags & flag_gate_failure) != 0;
    if (!(r.flags & flag_state_collapsed) && r.model.n_states == opt.n_states)
      carry = r.model;
    out.push_back(std::move(r));
    if (failed) break;
  }
  return out;
}

}  // namespace qptrap::hmm
