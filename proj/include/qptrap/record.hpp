// SPDX-License-Identifier: Apache-2.0
#pragma once

// Core data carriers shared by the simulator and the analysis chain: IQ
// voltage records, hidden-state sequences, and per-state Gaussian
// emission parameters.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace qptrap {

struct GaussianEmission {
  double center_i = 0.0;  // volts
  double center_q = 0.0;
  double sigma_i = 1.0;
  double sigma_q = 1.0;
};

// Power signal-to-noise ratio between two emissions: squared center
// distance over the product of the per-emission geometric-mean widths.
double snr(const GaussianEmission& a, const GaussianEmission& b);

struct RecordMeta {
  double temperature_k = 0.0;
  double flux = 0.0;       // in flux quanta
  double power_dbm = 0.0;
  std::uint64_t seed = 0;
};

struct Record {
  std::vector<float> iq;   // interleaved I0,Q0,I1,Q1,...
  double f_s = 0.0;        // Hz
  RecordMeta meta;

  std::size_t size() const { return iq.size() / 2; }
  double duration_s() const { return f_s > 0.0 ? static_cast<double>(size()) / f_s : 0.0; }
};

struct StateSequence {
  std::vector<std::uint8_t> states;
  double f_s = 0.0;

  std::size_t size() const { return states.size(); }
  // Arithmetic mean of the state labels (trapped-QP count average).
  double mean_occupation() const;
};

}  // namespace qptrap
