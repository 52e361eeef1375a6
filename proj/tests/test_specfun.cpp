// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "qptrap/specfun.hpp"
#include "qptrap/units.hpp"

using namespace qptrap;

TEST_CASE("lambert w0 fixed points") {
  CHECK(specfun::lambert_w0(0.0) == 0.0);
  CHECK(specfun::lambert_w0(-1.0 / std::exp(1.0)) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(specfun::lambert_w0(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("lambert w0 matches the bisection oracle") {
  for (double x : {-0.3, -0.1, -0.01, 0.01, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0}) {
    const double ref = oracles::lambert_w0_bisect(x);
    CHECK(specfun::lambert_w0(x) == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK(specfun::lambert_w0(-0.1) == doctest::Approx(-0.11183255915896297).epsilon(1e-12));
}

TEST_CASE("lambert w0 round trip across the branch") {
  const double lo = -1.0 / std::exp(1.0) + 1e-9;
  for (int i = 0; i <= 2000; ++i) {
    const double x = lo + (10.0 - lo) * i / 2000.0;
    const double w = specfun::lambert_w0(x);
    CHECK(w >= -1.0);
    CHECK(w * std::exp(w) == doctest::Approx(x).epsilon(1e-11));
  }
}

TEST_CASE("lambert w0 domain handling") {
  CHECK_THROWS_AS(specfun::lambert_w0(-1.0 / std::exp(1.0) - 1e-6), std::domain_error);
  // Floating-point noise just below the branch point clamps instead.
  CHECK(specfun::lambert_w0(-1.0 / std::exp(1.0) - 1e-13) == -1.0);
}

TEST_CASE("polylog known constants") {
  CHECK(specfun::polylog(2, 1.0) ==
        doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-14));
  CHECK(specfun::polylog(3, 1.0) == doctest::Approx(1.2020569031595943).epsilon(1e-14));
  CHECK(specfun::polylog(2, 0.0) == 0.0);
  CHECK(specfun::polylog(3, 0.0) == 0.0);
}

TEST_CASE("polylog matches the long-double series oracle") {
  for (double x = 0.01; x < 0.995; x += 0.007) {
    for (int s : {2, 3}) {
      const double ref = static_cast<double>(oracles::polylog_series(s, x));
      CHECK(specfun::polylog(s, x) == doctest::Approx(ref).epsilon(1e-13));
    }
  }
  CHECK(specfun::polylog(2, 0.1153) ==
        doctest::Approx(static_cast<double>(oracles::polylog_series(2, 0.1153L)))
            .epsilon(1e-14));
  CHECK(specfun::polylog(2, 0.1153) == doctest::Approx(0.11880).epsilon(1e-4));
}

TEST_CASE("polylog domain handling") {
  CHECK_THROWS_AS(specfun::polylog(1, 0.5), std::domain_error);
  CHECK_THROWS_AS(specfun::polylog(4, 0.5), std::domain_error);
  CHECK_THROWS_AS(specfun::polylog(2, -0.1), std::domain_error);
  CHECK_THROWS_AS(specfun::polylog(2, 1.1), std::domain_error);
}

TEST_CASE("debye bracket limits") {
  CHECK(specfun::debye_bracket(0.0) ==
        doctest::Approx(2.0 * specfun::zeta3).epsilon(1e-14));
  CHECK(specfun::debye_bracket(800.0) == 0.0);
  CHECK(specfun::debye_bracket(50.0) > 0.0);
}

TEST_CASE("debye bracket equals the quadrature oracle") {
  for (double u : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double ref = oracles::bracket_quad(u);
    CHECK(std::fabs(specfun::debye_bracket(u) - ref) < 1e-9);
  }
  // The paper-regime spot value.
  CHECK(specfun::debye_bracket(2.16) == doctest::Approx(1.3188).epsilon(2e-4));
  CHECK(specfun::debye_bracket(2.16) ==
        doctest::Approx(oracles::bracket_quad(2.16)).epsilon(1e-11));
}

TEST_CASE("debye bracket is strictly decreasing") {
  double prev = specfun::debye_bracket(0.0);
  for (int i = 1; i <= 500; ++i) {
    const double u = 50.0 * i / 500.0;
    const double v = specfun::debye_bracket(u);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("debye cutoff term") {
  // Fixed omega_D, T -> infinity: the argument goes to 0 and the term
  // approaches the full-bracket limit 2 zeta(3).
  const double omega_al = 2.0 * M_PI * 15.37e12;
  CHECK(specfun::debye_cutoff_term(omega_al, 1e6) ==
        doctest::Approx(2.0 * specfun::zeta3).epsilon(1e-6));

  // At laboratory temperatures the cutoff term is effectively zero for
  // both quoted Debye frequencies.
  const double omega_si = 2.0 * M_PI * 21.98e12;
  CHECK(specfun::debye_cutoff_term(omega_al, 0.3) < 1e-12);
  CHECK(specfun::debye_cutoff_term(omega_si, 0.3) < 1e-12);

  // Consistency with the bracket at the same argument.
  const double u = units::hbar_uev_s * omega_al / (units::k_B * 5.0);
  CHECK(specfun::debye_cutoff_term(omega_al, 5.0) ==
        doctest::Approx(specfun::debye_bracket(u)).epsilon(1e-12));
}
