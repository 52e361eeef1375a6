// SPDX-License-Identifier: Apache-2.0
#pragma once

// File formats: the "ABSR" binary IQ record, the sweep dataset CSV, the
// simulation manifest, and the structured fit report. All writers are
// deterministic: the same in-memory value always produces the same
// bytes, and every format round-trips through its reader.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qptrap/fitting.hpp"
#include "qptrap/leastsq.hpp"
#include "qptrap/record.hpp"

namespace qptrap::io {

// Binary record layout: 64-byte header (magic "ABSR", u16 version, u16
// reserved, f64 sample rate Hz, u64 IQ pair count, f64 temperature K,
// f64 flux, f64 power dBm, u64 seed, u64 reserved), then the samples as
// interleaved little-endian float32 I,Q pairs.
inline constexpr std::uint16_t record_format_version = 1;

void write_record(const std::string& path, const Record& record);

// Throws IoError naming the file for missing files, bad magic,
// unsupported versions, or truncated payloads.
Record read_record(const std::string& path);

inline constexpr const char* dataset_header =
    "T_K,flux,delta_a_ueV,gamma_trap_Hz,gamma_release_Hz,n_bar,eff_fs_Hz,snr,flags";

void write_dataset(const std::string& path, const std::vector<fit::SweepRow>& rows);
std::vector<fit::SweepRow> read_dataset(const std::string& path);

struct ManifestEntry {
  std::string file;        // record path relative to the manifest
  double t_k = 0.0;
  double flux = 0.0;
  double power_dbm = 0.0;
  int segment = 0;
  std::uint64_t seed = 0;
};

struct Manifest {
  std::uint64_t base_seed = 0;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

struct FitReport {
  lsq::FitResult trap_stage1;            // beta and gap
  lsq::FitResult trap_stage2;            // x_ne
  lsq::FitResult release;                // alpha
  std::map<double, lsq::FitResult> alpha_m;
  fit::Baselines trap0;
  fit::Baselines release0;
  fit::Baselines nbar0;
  fit::ConsistencyReport consistency;
  std::vector<std::string> warnings;
};

void write_fit_report(const std::string& path, const FitReport& report);
FitReport read_fit_report(const std::string& path);

// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace qptrap::io
