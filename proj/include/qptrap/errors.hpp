// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qptrap {

// Invalid configuration or parameter values; maps to process exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Runtime failures (I/O, corrupt inputs); map to process exit code 2.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// An off-diagonal transition probability exceeds 1/e, so no rate on the
// principal branch reproduces it at this sample rate.
struct IdentifiabilityError : std::runtime_error {
  explicit IdentifiabilityError(const std::string& what) : std::runtime_error(what) {}
};

// An EM fit lost a state: its responsibility mass fell below the floor.
struct StateCollapseError : std::runtime_error {
  explicit StateCollapseError(const std::string& what) : std::runtime_error(what) {}
};

// A depth has no rows below the requested baseline temperature window.
struct MissingBaselineError : std::runtime_error {
  explicit MissingBaselineError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qptrap
