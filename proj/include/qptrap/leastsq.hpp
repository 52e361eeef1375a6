// SPDX-License-Identifier: Apache-2.0
#pragma once

// Damped Gauss-Newton (Levenberg-style) nonlinear least squares with box
// bounds, numerical Jacobians, and 1-sigma uncertainties from the
// Jacobian at the optimum scaled by the reduced chi-square.

#include <functional>
#include <string>
#include <vector>

namespace qptrap::lsq {

enum class FitStatus { converged, max_iter, singular };

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> estimates;
  std::vector<double> uncertainties;   // 1 sigma
  double residual_norm = 0.0;          // sqrt(sum of squared weighted residuals)
  int dof = 0;                         // data points minus parameters
  FitStatus status = FitStatus::max_iter;
  std::vector<std::string> notes;
};

const char* to_string(FitStatus s);

// Evaluates the model at every data point for the given parameters.
using ModelFn = std::function<void(const double* params, std::vector<double>& out)>;

struct LsqOptions {
  int max_iter = 200;
  double tol = 1e-12;        // relative step and cost-change threshold
  double initial_lambda = 1e-3;
};

// Minimizes sum_i ((y_i - f_i(p)) / sigma_i)^2 over p within
// [lower, upper]. sigmas may be empty for unweighted fits. init must lie
// inside the bounds. Parameters are scaled internally by their initial
// magnitudes so wildly different scales stay well conditioned.
FitResult least_squares(const ModelFn& model, const std::vector<double>& y,
                        const std::vector<double>& sigmas, std::vector<double> init,
                        const std::vector<double>& lower, const std::vector<double>& upper,
                        const std::vector<std::string>& names, const LsqOptions& opt = {});

}  // namespace qptrap::lsq
