// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "obliqc/chebyshev.hpp"
#include "support/test_util.hpp"

using namespace obliqc;
namespace ch = obliqc::chebyshev;

namespace {

// Independent evaluation route: expand the Chebyshev basis into monomials
// (stable at the low degrees this check runs at) and evaluate with Horner.
std::vector<double> to_power_basis(const ch::ChebyshevApprox& a) {
  const size_t n = a.coefficients.size();
  // T_0 = 1, T_1 = x, T_{k+1} = 2x T_k - T_{k-1}
  std::vector<std::vector<double>> t(n);
  t[0] = {1.0};
  if (n > 1) t[1] = {0.0, 1.0};
  for (size_t kk = 2; kk < n; ++kk) {
    t[kk].assign(kk + 1, 0.0);
    for (size_t j = 0; j < t[kk - 1].size(); ++j) t[kk][j + 1] += 2.0 * t[kk - 1][j];
    for (size_t j = 0; j < t[kk - 2].size(); ++j) t[kk][j] -= t[kk - 2][j];
  }
  std::vector<double> mono(n, 0.0);
  for (size_t kk = 0; kk < n; ++kk)
    for (size_t j = 0; j < t[kk].size(); ++j) mono[j] += a.coefficients[kk] * t[kk][j];
  return mono;
}

double horner(std::span<const double> mono, double x) {
  double acc = 0.0;
  for (size_t i = mono.size(); i-- > 0;) acc = acc * x + mono[i];
  return acc;
}

}  // namespace

TEST_CASE("fit produces degree+1 coefficients with even terms only") {
  for (int degree : {1, 2, 3, 8, 17}) {
    auto a = ch::fit_abs(degree, 10001);
    CHECK(a.degree == degree);
    CHECK(a.coefficients.size() == size_t(degree) + 1);
    for (int kk = 1; kk <= degree; kk += 2)
      CHECK(a.coefficients[size_t(kk)] == 0.0);
  }
  CHECK_THROWS_AS(ch::fit_abs(0), Error);
}

TEST_CASE("the error at zero is within the measured max error") {
  for (int degree : {2, 4, 8, 32}) {
    auto a = ch::fit_abs(degree, 100001);
    CHECK(std::fabs(ch::eval(a, 0.0)) <= a.measured_max_error);
  }
}

TEST_CASE("measured max error is non-increasing in the degree") {
  double prev = 1e9;
  for (int degree : {2, 4, 8, 16, 32, 64}) {
    auto a = ch::fit_abs(degree, 100001);
    CHECK(a.measured_max_error <= prev);
    CHECK(a.measured_max_error > 0.0);
    prev = a.measured_max_error;
  }
}

TEST_CASE("Clenshaw agrees with the power-basis route at low degrees") {
  for (int degree : {2, 4, 6, 8, 10}) {
    auto a = ch::fit_abs(degree, 101);
    auto mono = to_power_basis(a);
    for (int i = 0; i <= 200; ++i) {
      const double x = -1.0 + double(i) / 100.0;
      const double via_clenshaw = ch::eval(a, x);
      const double via_horner = horner(mono, x);
      CHECK(std::fabs(via_clenshaw - via_horner) <=
            1e-12 * std::max(1.0, std::fabs(via_clenshaw)));
    }
  }
}

TEST_CASE("a permissive target selects the smallest swept degree") {
  ch::Rule2Workload w;
  w.instances = 2000;
  std::vector<ch::DegreeSweepEntry> sweep;
  CHECK(ch::select_poly_degree(1.0, w, ch::default_degree_sweep(), &sweep) == 2);
  REQUIRE(sweep.size() == 1);
  CHECK(sweep[0].degree == 2);
}

TEST_CASE("tighter targets never select a smaller degree") {
  ch::Rule2Workload w;
  w.instances = 20000;
  int prev_degree = 0;
  for (double target : {0.5, 1e-2, 1e-3}) {
    const int d = ch::select_poly_degree(target, w);
    CHECK(d >= prev_degree);
    prev_degree = d;
  }
}

TEST_CASE("degree selection is deterministic for a fixed seed") {
  ch::Rule2Workload w;
  w.instances = 20000;
  std::vector<ch::DegreeSweepEntry> s1, s2;
  const int d1 = ch::select_poly_degree(1e-3, w, ch::default_degree_sweep(), &s1);
  const int d2 = ch::select_poly_degree(1e-3, w, ch::default_degree_sweep(), &s2);
  CHECK(d1 == d2);
  REQUIRE(s1.size() == s2.size());
  for (size_t i = 0; i < s1.size(); ++i)
    CHECK(s1[i].outcome_error == s2[i].outcome_error);
}

TEST_CASE("an impossible target over a tiny sweep is unattainable") {
  ch::Rule2Workload w;
  w.instances = 5000;
  const int degrees[] = {2};
  try {
    ch::select_poly_degree(1e-9, w, degrees);
    FAIL("expected unattainable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unattainable);
  }
}

TEST_CASE("outcome error falls as the degree rises on the default workload") {
  ch::Rule2Workload w;
  w.instances = 50000;
  const double coarse = ch::rule_outcome_error(ch::fit_abs(4, 10001), w);
  const double fine = ch::rule_outcome_error(ch::fit_abs(128, 10001), w);
  CHECK(fine < coarse);
}
