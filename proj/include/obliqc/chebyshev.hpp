// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "obliqc/error.hpp"

namespace obliqc::chebyshev {

/// Truncated Chebyshev-basis approximation of |x| on [-1, 1]. Serves as the
/// cleartext-verified reference for approximate backends; the rule engine
/// itself only uses exact integer kernels.
struct ChebyshevApprox {
  int degree = 0;
  std::vector<double> coefficients;  // size degree + 1, odd entries zero
  double measured_max_error = 0.0;   // measured on a dense grid, never assumed
};

/// Coefficients from the analytic Chebyshev series of |x| truncated at
/// `degree` (even terms only). measured_max_error is the max of
/// |approx(x) - |x|| over a uniform grid of `grid_points` points.
ChebyshevApprox fit_abs(int degree, size_t grid_points = 1'000'001);

/// Clenshaw evaluation of the approximation at x in [-1, 1].
double eval(const ChebyshevApprox& a, double x);

/// Generator of in-control Rule-2 evaluation instances: windows of Gaussian
/// samples around the target mean, clipped to [lo, hi]. Continuous decimals,
/// as an approximate real-number backend would see them. Deterministic for a
/// given seed.
struct Rule2Workload {
  uint64_t seed = 1;
  double mean = 50.0;
  double sd = 2.0;
  int window = 8;
  double lo = 40.0;
  double hi = 60.0;
  size_t instances = 1'000'000;
};

/// Fraction of workload instances whose Rule-2 verdict changes when the
/// exact |diff| is replaced by the polynomial approximation.
double rule_outcome_error(const ChebyshevApprox& a, const Rule2Workload& w);

struct DegreeSweepEntry {
  int degree;
  double max_error;      // dense-grid max error of the fit
  double outcome_error;  // measured rule-outcome error on the workload
};

std::span<const int> default_degree_sweep();

/// Smallest swept degree whose measured rule-outcome error is below
/// `target`; fills `sweep` (when given) with one entry per degree tried.
/// Throws unattainable if no swept degree meets the target.
int select_poly_degree(double target_outcome_error, const Rule2Workload& w,
                       std::span<const int> degrees = default_degree_sweep(),
                       std::vector<DegreeSweepEntry>* sweep = nullptr);

}  // namespace obliqc::chebyshev
