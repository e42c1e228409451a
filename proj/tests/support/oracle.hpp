// SPDX-License-Identifier: Apache-2.0
// Plain floating-point Westgard evaluation, written independently of the
// integer engine: doubles, fabs, sqrt and straightforward loops. The test
// suites compare decrypted engine verdicts against these.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace oracle {

inline bool r1(std::span<const double> xs, double mean, double sd) {
  const double upper = mean + 3.0 * sd;
  const double lower = mean - 3.0 * sd;
  for (double x : xs)
    if (x > upper || x < lower) return true;
  return false;
}

inline bool r2(std::span<const double> xs, double mean, double sd) {
  const double limit = 4.0 * sd;
  const double upper = mean + 2.0 * sd;
  const double lower = mean - 2.0 * sd;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    if (std::fabs(xs[i + 1] - xs[i]) > limit) return true;
    if (xs[i] > upper && xs[i + 1] > upper) return true;
    if (xs[i] < lower && xs[i + 1] < lower) return true;
  }
  return false;
}

struct R3Result {
  double score = 0.0;
  std::vector<bool> flags;
};

inline double sample_sd(std::span<const double> xs) {
  const double n = double(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

inline R3Result r3(std::span<const std::vector<double>> rows, double sd) {
  R3Result out;
  const double sigma_limit = 2.0 * sd;
  for (const auto& row : rows) {
    double hi = row[0], lo = row[0];
    for (double x : row) {
      hi = std::max(hi, x);
      lo = std::min(lo, x);
    }
    out.score = std::max(out.score, hi - lo);
    out.flags.push_back(sample_sd(row) > sigma_limit);
  }
  return out;
}

// --- exact-tie detection (scaled integer domain) ---------------------------
// A disagreement between the integer engine and the doubles above can only
// sit exactly on a threshold; these predicates identify such inputs so the
// tie-excluded suites can resample them.

inline bool r1_tie(std::span<const int64_t> raw, int64_t upper3, int64_t lower3) {
  for (int64_t x : raw)
    if (x == upper3 || x == lower3) return true;
  return false;
}

inline bool r2_tie(std::span<const int64_t> raw, int64_t upper2, int64_t lower2,
                   int64_t range4) {
  for (size_t i = 0; i + 1 < raw.size(); ++i) {
    if (std::llabs(raw[i + 1] - raw[i]) == range4) return true;
    if (raw[i] == upper2 || raw[i] == lower2) return true;
  }
  if (!raw.empty() && (raw.back() == upper2 || raw.back() == lower2)) return true;
  return false;
}

inline bool r3_tie(std::span<const std::vector<int64_t>> rows, int64_t sigma2_raw,
                   int64_t anchor) {
  for (const auto& row : rows) {
    const int64_t n = int64_t(row.size());
    int64_t sum = 0, sum_sq = 0;
    for (int64_t x : row) {
      const int64_t d = x - anchor;
      sum += d;
      sum_sq += d * d;
    }
    const int64_t ssd = n * sum_sq - sum * sum;
    if (ssd == n * (n - 1) * sigma2_raw * sigma2_raw) return true;
  }
  return false;
}

}  // namespace oracle
