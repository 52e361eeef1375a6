// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small dense linear-algebra helpers shared by the stationary-state
// solver and the least-squares normal equations. Row-major storage.

#include <cmath>
#include <cstddef>
#include <vector>

namespace qptrap::detail {

// Solves A x = b in place (A destroyed, b replaced by x) with partial
// pivoting. Returns false when a pivot is smaller than tiny.
inline bool solve_inplace(std::vector<double>& a, std::vector<double>& b, int n,
                          double tiny = 1e-300) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(a[static_cast<std::size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(a[static_cast<std::size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < tiny) return false;
    if (pivot != col) {
      for (int c = col; c < n; ++c)
        std::swap(a[static_cast<std::size_t>(pivot) * n + c],
                  a[static_cast<std::size_t>(col) * n + c]);
      std::swap(b[pivot], b[col]);
    }
    const double inv = 1.0 / a[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + col] * inv;
      if (f == 0.0) continue;
      a[static_cast<std::size_t>(r) * n + col] = 0.0;
      for (int c = col + 1; c < n; ++c)
        a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[static_cast<std::size_t>(r) * n + c] * b[c];
    b[r] = s / a[static_cast<std::size_t>(r) * n + r];
  }
  return true;
}

// In-place inverse via Gauss-Jordan; returns false if singular.
inline bool invert_inplace(std::vector<double>& a, int n, double tiny = 1e-300) {
  std::vector<double> aug(static_cast<std::size_t>(n) * 2 * n, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) aug[static_cast<std::size_t>(r) * 2 * n + c] = a[static_cast<std::size_t>(r) * n + c];
    aug[static_cast<std::size_t>(r) * 2 * n + n + r] = 1.0;
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(aug[static_cast<std::size_t>(col) * 2 * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(aug[static_cast<std::size_t>(r) * 2 * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < tiny) return false;
    if (pivot != col) {
      for (int c = 0; c < 2 * n; ++c)
        std::swap(aug[static_cast<std::size_t>(pivot) * 2 * n + c],
                  aug[static_cast<std::size_t>(col) * 2 * n + c]);
    }
    const double inv = 1.0 / aug[static_cast<std::size_t>(col) * 2 * n + col];
    for (int c = 0; c < 2 * n; ++c) aug[static_cast<std::size_t>(col) * 2 * n + c] *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = aug[static_cast<std::size_t>(r) * 2 * n + col];
      if (f == 0.0) continue;
      for (int c = 0; c < 2 * n; ++c)
        aug[static_cast<std::size_t>(r) * 2 * n + c] -= f * aug[static_cast<std::size_t>(col) * 2 * n + c];
    }
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a[static_cast<std::size_t>(r) * n + c] = aug[static_cast<std::size_t>(r) * 2 * n + n + c];
  return true;
}

}  // namespace qptrap::detail
