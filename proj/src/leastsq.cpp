// SPDX-License-Identifier: Apache-2.0

#include "qptrap/leastsq.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "linalg_internal.hpp"
#include "qptrap/errors.hpp"

namespace qptrap::lsq {

const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::converged:
      return "converged";
    case FitStatus::max_iter:
      return "max-iter";
    case FitStatus::singular:
      return "singular";
  }
  return "unknown";
}

namespace {

double cost_of(const ModelFn& model, const std::vector<double>& y,
               const std::vector<double>& sigmas, const std::vector<double>& p,
               std::vector<double>& pred, std::vector<double>& resid) {
  model(p.data(), pred);
  double cost = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = sigmas.empty() ? 1.0 : 1.0 / sigmas[i];
    resid[i] = (y[i] - pred[i]) * w;
    cost += resid[i] * resid[i];
  }
  return cost;
}

}  // namespace

FitResult least_squares(const ModelFn& model, const std::vector<double>& y,
                        const std::vector<double>& sigmas, std::vector<double> init,
                        const std::vector<double>& lower, const std::vector<double>& upper,
                        const std::vector<std::string>& names, const LsqOptions& opt) {
  const std::size_t n = y.size();
  const std::size_t np = init.size();
  if (np == 0) throw ConfigError("least_squares needs at least one parameter");
  if (n < np) throw ConfigError("fewer data points than parameters");
  if (lower.size() != np || upper.size() != np || names.size() != np)
    throw ConfigError("parameter bound and name sizes must match init");
  if (!sigmas.empty() && sigmas.size() != n)
    throw ConfigError("sigma list size must match data size");
  for (std::size_t j = 0; j < np; ++j) {
    if (init[j] < lower[j] || init[j] > upper[j])
      throw ConfigError("initial value of " + names[j] + " lies outside its bounds");
  }
  if (!sigmas.empty()) {
    for (double s : sigmas)
      if (!(s > 0.0)) throw ConfigError("sigmas must be positive");
  }

  // Internal scaling: work in units of the initial magnitudes.
  std::vector<double> scale(np);
  for (std::size_t j = 0; j < np; ++j) scale[j] = std::max(std::fabs(init[j]), 1e-30);

  std::vector<double> p = init;
  std::vector<double> pred(n), resid(n), pred_try(n), resid_try(n);
  double cost = cost_of(model, y, sigmas, p, pred, resid);

  std::vector<double> jac(n * np);  // d resid_i / d theta_j, theta = p / scale
  std::vector<double> jtj(np * np), jtr(np), a(np * np), b(np), p_try(np);
  double lambda = opt.initial_lambda;
  FitStatus status = FitStatus::max_iter;

  // Numerical Jacobian of the weighted residuals, central differences in
  // scaled coordinates.
  std::vector<double> fhi(n);
  const auto fill_jacobian = [&](const std::vector<double>& at) {
    for (std::size_t j = 0; j < np; ++j) {
      const double h = 1e-6 * scale[j];
      std::vector<double> ph = at;
      ph[j] = std::min(at[j] + h, upper[j]);
      const double hi = ph[j];
      model(ph.data(), fhi);
      ph[j] = std::max(at[j] - h, lower[j]);
      const double lo = ph[j];
      model(ph.data(), pred_try);
      const double span = hi - lo;
      if (span <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) jac[i * np + j] = 0.0;
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double w = sigmas.empty() ? 1.0 : 1.0 / sigmas[i];
        // Residual derivative carries a minus sign versus the model's.
        jac[i * np + j] = -(fhi[i] - pred_try[i]) / span * w * scale[j];
      }
    }
  };
  const auto fill_normal = [&]() {
    for (std::size_t a_j = 0; a_j < np; ++a_j) {
      jtr[a_j] = 0.0;
      for (std::size_t b_j = 0; b_j <= a_j; ++b_j) jtj[a_j * np + b_j] = 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a_j = 0; a_j < np; ++a_j) {
        const double ja = jac[i * np + a_j];
        jtr[a_j] += ja * resid[i];
        for (std::size_t b_j = 0; b_j <= a_j; ++b_j) jtj[a_j * np + b_j] += ja * jac[i * np + b_j];
      }
    }
    for (std::size_t a_j = 0; a_j < np; ++a_j)
      for (std::size_t b_j = a_j + 1; b_j < np; ++b_j) jtj[a_j * np + b_j] = jtj[b_j * np + a_j];
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    fill_jacobian(p);
    fill_normal();
    bool accepted = false;
    for (int inner = 0; inner < 40; ++inner) {
      a = jtj;
      for (std::size_t j = 0; j < np; ++j) {
        const double d = jtj[j * np + j];
        a[j * np + j] = d + lambda * std::max(d, 1e-30);
      }
      b = jtr;
      // Gauss-Newton step solves J^T J delta = -J^T r; with our residual
      // sign convention the right-hand side is -jtr.
      for (double& v : b) v = -v;
      if (!detail::solve_inplace(a, b, static_cast<int>(np))) {
        lambda *= 10.0;
        continue;
      }
      double step_norm = 0.0;
      for (std::size_t j = 0; j < np; ++j) {
        p_try[j] = std::clamp(p[j] + b[j] * scale[j], lower[j], upper[j]);
        step_norm = std::max(step_norm, std::fabs(p_try[j] - p[j]) / scale[j]);
      }
      const double cost_try = cost_of(model, y, sigmas, p_try, pred_try, resid_try);
      if (cost_try <= cost) {
        const double improvement = cost - cost_try;
        p = p_try;
        pred = pred_try;
        resid = resid_try;
        cost = cost_try;
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
        if (step_norm < opt.tol || improvement <= opt.tol * std::max(cost, 1e-300)) {
          status = FitStatus::converged;
        }
        break;
      }
      lambda *= 5.0;
      if (lambda > 1e15) break;
    }
    if (!accepted) {
      // No downhill step exists at any damping: treat as converged at a
      // stationary point.
      status = FitStatus::converged;
      break;
    }
    if (status == FitStatus::converged) break;
  }

  FitResult out;
  out.names = names;
  out.estimates = p;
  out.residual_norm = std::sqrt(cost);
  out.dof = static_cast<int>(n - np);
  out.status = status;
  out.uncertainties.assign(np, 0.0);

  // Covariance from (J^T J)^-1 at the optimum, scaled by the reduced
  // chi-square so unweighted fits still report calibrated errors.
  fill_jacobian(p);
  fill_normal();
  std::vector<double> cov = jtj;
  if (detail::invert_inplace(cov, static_cast<int>(np))) {
    const double chi2_red = out.dof > 0 ? cost / out.dof : 1.0;
    for (std::size_t j = 0; j < np; ++j) {
      const double v = cov[j * np + j] * chi2_red;
      out.uncertainties[j] = v > 0.0 ? std::sqrt(v) * scale[j] : 0.0;
    }
  } else {
    out.status = FitStatus::singular;
  }
  return out;
}

}  // namespace qptrap::lsq
