// SPDX-License-Identifier: Apache-2.0

#include "qptrap/record.hpp"

#include <cmath>

namespace qptrap {

double snr(const GaussianEmission& a, const GaussianEmission& b) {
  const double di = a.center_i - b.center_i;
  const double dq = a.center_q - b.center_q;
  const double sbar_a = std::sqrt(a.sigma_i * a.sigma_q);
  const double sbar_b = std::sqrt(b.sigma_i * b.sigma_q);
  return (di * di + dq * dq) / (sbar_a * sbar_b);
}

double StateSequence::mean_occupation() const {
  if (states.empty()) return 0.0;
  double total = 0.0;
  for (std::uint8_t s : states) total += s;
  return total / static_cast<double>(states.size());
}

}  // namespace qptrap
