// SPDX-License-Identifier: Apache-2.0
#include "obliqc/chebyshev.hpp"

#include <cmath>
#include <numbers>

namespace obliqc::chebyshev {

namespace {

// splitmix64 + polar Box-Muller: self-contained so workload streams are
// bit-identical across standard libraries.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double next_unit() {  // (0, 1)
    return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

private:
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

ChebyshevApprox fit_abs(int degree, size_t grid_points) {
  if (degree < 1) fail(Errc::config_error, "degree must be >= 1");
  ChebyshevApprox a;
  a.degree = degree;
  a.coefficients.assign(size_t(degree) + 1, 0.0);
  // |x| = 2/pi + (4/pi) * sum_{k>=1} (-1)^(k+1) T_{2k}(x) / (4k^2 - 1)
  a.coefficients[0] = 2.0 / std::numbers::pi;
  for (int k = 1; 2 * k <= degree; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    a.coefficients[size_t(2 * k)] =
        sign * 4.0 / (std::numbers::pi * (4.0 * k * k - 1.0));
  }
  double max_err = 0.0;
  const size_t n = grid_points < 2 ? 2 : grid_points;
  for (size_t i = 0; i < n; ++i) {
    const double x = -1.0 + 2.0 * double(i) / double(n - 1);
    const double err = std::fabs(eval(a, x) - std::fabs(x));
    if (err > max_err) max_err = err;
  }
  a.measured_max_error = max_err;
  return a;
}

double eval(const ChebyshevApprox& a, double x) {
  // Clenshaw recurrence.
  double b1 = 0.0, b2 = 0.0;
  for (size_t k = a.coefficients.size() - 1; k >= 1; --k) {
    const double b = 2.0 * x * b1 - b2 + a.coefficients[k];
    b2 = b1;
    b1 = b;
  }
  return x * b1 - b2 + a.coefficients[0];
}

namespace {

struct Rule2Instance {
  std::vector<double> samples;
};

void fill_instance(Rng& rng, const Rule2Workload& w, std::vector<double>& out) {
  out.resize(size_t(w.window));
  for (auto& x : out) {
    double v = w.mean + w.sd * rng.next_gaussian();
    if (v < w.lo) v = w.lo;
    if (v > w.hi) v = w.hi;
    x = v;
  }
}

bool rule2_verdict(std::span<const double> xs, double mean, double sd,
                   const ChebyshevApprox* approx, double half_span) {
  const double range_limit = 4.0 * sd;
  const double upper2 = mean + 2.0 * sd;
  const double lower2 = mean - 2.0 * sd;
  const double span = 2.0 * half_span;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    const double d = xs[i + 1] - xs[i];
    const double mag = approx ? span * eval(*approx, d / span) : std::fabs(d);
    if (mag > range_limit) return true;
    if (xs[i] > upper2 && xs[i + 1] > upper2) return true;
    if (xs[i] < lower2 && xs[i + 1] < lower2) return true;
  }
  return false;
}

}  // namespace

double rule_outcome_error(const ChebyshevApprox& a, const Rule2Workload& w) {
  if (w.window < 2) fail(Errc::config_error, "rule-2 workload needs window >= 2");
  Rng rng(w.seed);
  std::vector<double> xs;
  const double half_span = (w.hi - w.lo) / 2.0;
  size_t mismatches = 0;
  for (size_t i = 0; i < w.instances; ++i) {
    fill_instance(rng, w, xs);
    const bool exact = rule2_verdict(xs, w.mean, w.sd, nullptr, half_span);
    const bool approxed = rule2_verdict(xs, w.mean, w.sd, &a, half_span);
    if (exact != approxed) ++mismatches;
  }
  return double(mismatches) / double(w.instances);
}

std::span<const int> default_degree_sweep() {
  static const int degrees[] = {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048};
  return degrees;
}

int select_poly_degree(double target_outcome_error, const Rule2Workload& w,
                       std::span<const int> degrees,
                       std::vector<DegreeSweepEntry>* sweep) {
  if (!(target_outcome_error > 0.0 && target_outcome_error <= 1.0))
    fail(Errc::config_error, "target error must be in (0, 1]");
  for (int degree : degrees) {
    ChebyshevApprox a = fit_abs(degree);
    const double err = rule_outcome_error(a, w);
    if (sweep) sweep->push_back({degree, a.measured_max_error, err});
    if (err < target_outcome_error) return degree;
  }
  fail(Errc::unattainable, "no swept degree meets the target outcome error");
}

}  // namespace obliqc::chebyshev
