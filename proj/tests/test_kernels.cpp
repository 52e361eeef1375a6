// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "qptrap/kernels.hpp"

using namespace qptrap;

namespace {

struct Problem {
  std::vector<float> iq;
  std::vector<kernels::EmissionNat> states;
  std::vector<double> weights;
  std::size_t n = 0;
  int k = 0;
};

Problem make_problem(std::size_t n, int k_states, unsigned seed) {
  Problem p;
  p.n = n;
  p.k = k_states;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 2.0f);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  p.iq.resize(2 * n);
  for (auto& v : p.iq) v = gauss(rng);
  for (int k = 0; k < k_states; ++k) {
    kernels::EmissionNat s;
    s.center_i = 3.0 * k - 2.0;
    s.center_q = 1.0 - 0.5 * k;
    const double var = 0.5 + 0.25 * k;
    s.inv_two_var_i = 1.0 / (2.0 * var);
    s.inv_two_var_q = 1.0 / (2.0 * var);
    s.log_norm = -std::log(2.0 * M_PI * var);
    p.states.push_back(s);
  }
  p.weights.resize(static_cast<std::size_t>(k_states) * n);
  for (auto& w : p.weights) w = uni(rng);
  return p;
}

// Runs one operation under both backends and returns the outputs.
template <typename Fn>
void for_each_backend(Fn&& fn) {
  REQUIRE(kernels::force_backend(kernels::Backend::scalar));
  fn(kernels::Backend::scalar);
  if (kernels::force_backend(kernels::Backend::avx2)) {
    fn(kernels::Backend::avx2);
    // Leave the default selection in place for other tests.
    kernels::force_backend(kernels::Backend::scalar);
  }
}

}  // namespace

TEST_CASE("backend plumbing") {
  CHECK(std::string(kernels::backend_name(kernels::Backend::scalar)) == "scalar");
  CHECK(std::string(kernels::backend_name(kernels::Backend::avx2)) == "avx2");
  CHECK(kernels::force_backend(kernels::Backend::scalar));
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
}

TEST_CASE("emission loglik equals the direct formula") {
  // Sizes chosen to exercise SIMD main loops and scalar remainders.
  for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 1001u}) {
    const Problem p = make_problem(n, 3, 42 + static_cast<unsigned>(n));
    std::vector<std::vector<double>> results;
    for_each_backend([&](kernels::Backend) {
      std::vector<double> out(3 * n, -1.0);
      kernels::emission_loglik(p.iq.data(), n, p.states.data(), 3, out.data());
      results.push_back(std::move(out));
    });
    for (int k = 0; k < 3; ++k)
      for (std::size_t t = 0; t < n; ++t) {
        const auto& s = p.states[k];
        const double di = p.iq[2 * t] - s.center_i;
        const double dq = p.iq[2 * t + 1] - s.center_q;
        const double ref = s.log_norm - di * di * s.inv_two_var_i - dq * dq * s.inv_two_var_q;
        for (const auto& r : results)
          CHECK(r[k * n + t] == doctest::Approx(ref).epsilon(1e-12));
      }
    // Backends agree to the last bit or within fused-multiply rounding.
    if (results.size() == 2)
      for (std::size_t i = 0; i < results[0].size(); ++i)
        CHECK(results[0][i] == doctest::Approx(results[1][i]).epsilon(1e-13));
  }
}

TEST_CASE("rowwise max and exp shift") {
  for (std::size_t n : {1u, 5u, 8u, 130u}) {
    const Problem p = make_problem(n, 4, 7 + static_cast<unsigned>(n));
    std::vector<double> table(4 * n);
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> uni(-30.0, 0.0);
    for (auto& v : table) v = uni(rng);

    std::vector<std::vector<double>> shifts;
    std::vector<std::vector<double>> exps;
    for_each_backend([&](kernels::Backend) {
      std::vector<double> shift(n, 1.0);
      kernels::rowwise_max(table.data(), n, 4, shift.data());
      std::vector<double> out(table);
      kernels::exp_shift(out.data(), shift.data(), n, 4, out.data());
      shifts.push_back(std::move(shift));
      exps.push_back(std::move(out));
    });

    for (std::size_t t = 0; t < n; ++t) {
      double m = table[t];
      for (int k = 1; k < 4; ++k) m = std::max(m, table[k * n + t]);
      for (const auto& s : shifts) CHECK(s[t] == m);
      for (int k = 0; k < 4; ++k) {
        const double ref = std::exp(table[k * n + t] - m);
        for (const auto& e : exps)
          CHECK(e[k * n + t] == doctest::Approx(ref).epsilon(1e-14));
      }
      // After shifting, the per-sample max must map to exactly exp(0).
      double best = 0.0;
      for (int k = 0; k < 4; ++k) best = std::max(best, exps[0][k * n + t]);
      CHECK(best == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("weighted moments") {
  for (std::size_t n : {1u, 6u, 64u, 999u}) {
    const Problem p = make_problem(n, 3, 11 + static_cast<unsigned>(n));
    std::vector<std::vector<kernels::MomentSums>> runs;
    for_each_backend([&](kernels::Backend) {
      std::vector<kernels::MomentSums> out(3);
      kernels::weighted_moments(p.weights.data(), p.iq.data(), n, 3, out.data());
      runs.push_back(std::move(out));
    });
    for (int k = 0; k < 3; ++k) {
      kernels::MomentSums ref;
      for (std::size_t t = 0; t < n; ++t) {
        const double w = p.weights[k * n + t];
        const double i = p.iq[2 * t];
        const double q = p.iq[2 * t + 1];
        ref.w += w;
        ref.wi += w * i;
        ref.wq += w * q;
        ref.wii += w * i * i;
        ref.wqq += w * q * q;
      }
      for (const auto& run : runs) {
        CHECK(run[k].w == doctest::Approx(ref.w).epsilon(1e-12));
        CHECK(run[k].wi == doctest::Approx(ref.wi).epsilon(1e-10));
        CHECK(run[k].wq == doctest::Approx(ref.wq).epsilon(1e-10));
        CHECK(run[k].wii == doctest::Approx(ref.wii).epsilon(1e-12));
        CHECK(run[k].wqq == doctest::Approx(ref.wqq).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("boxcar mean") {
  for (std::size_t n : {4u, 9u, 64u, 1000u}) {
    for (int k : {1, 2, 4, 7}) {
      const Problem p = make_problem(n, 2, 23 + static_cast<unsigned>(n) + k);
      std::vector<std::vector<float>> runs;
      for_each_backend([&](kernels::Backend) {
        std::vector<float> out(2 * (n / k), -99.0f);
        kernels::boxcar_mean(p.iq.data(), n, k, out.data());
        runs.push_back(std::move(out));
      });
      const std::size_t n_out = n / static_cast<std::size_t>(k);
      for (std::size_t w = 0; w < n_out; ++w) {
        double si = 0.0;
        double sq = 0.0;
        for (int j = 0; j < k; ++j) {
          si += p.iq[2 * (w * k + j)];
          sq += p.iq[2 * (w * k + j) + 1];
        }
        for (const auto& run : runs) {
          CHECK(run[2 * w] == doctest::Approx(si / k).epsilon(1e-6));
          CHECK(run[2 * w + 1] == doctest::Approx(sq / k).epsilon(1e-6));
        }
      }
      // k = 1 must be an exact copy.
      if (k == 1)
        CHECK(std::memcmp(runs[0].data(), p.iq.data(), sizeof(float) * 2 * n) == 0);
    }
  }
}
