// SPDX-License-Identifier: Apache-2.0
#include "obliqc/rules.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <mutex>
#include <unordered_map>

#include "obliqc/kernels.hpp"
#include "obliqc/trace_backend.hpp"

namespace obliqc::rules {

std::string rule_name(RuleId id) {
  switch (id) {
    case RuleId::r1: return "R1";
    case RuleId::r2: return "R2";
    case RuleId::r3: return "R3";
  }
  return "?";
}

RuleId rule_from_name(const std::string& name) {
  if (name == "R1") return RuleId::r1;
  if (name == "R2") return RuleId::r2;
  if (name == "R3") return RuleId::r3;
  fail(Errc::unknown_rule, "unknown rule '" + name + "'");
}

void RuleSpec::validate() const {
  if (!(target_sd > 0.0))
    fail(Errc::config_error, "rule target SD must be positive");
  if (!std::isfinite(target_mean) || !std::isfinite(target_sd))
    fail(Errc::config_error, "rule parameters must be finite");
  switch (id) {
    case RuleId::r1:
      if (window < 1) fail(Errc::shape_mismatch, "rule 1 needs window >= 1");
      break;
    case RuleId::r2:
      if (window < 2) fail(Errc::shape_mismatch, "rule 2 needs window >= 2");
      break;
    case RuleId::r3:
      if (rows < 1 || cols < 2)
        fail(Errc::shape_mismatch, "rule 3 needs rows >= 1 and cols >= 2");
      break;
  }
}

namespace {

int64_t scaled_threshold(double value, int64_t scale) {
  const double v = value * double(scale);
  if (!(std::fabs(v) < 9.0e15))
    fail(Errc::plan_overflow, "threshold magnitude not representable",
         int64_t(9e15));
  return std::llround(v);
}

struct BoundChecker {
  std::vector<Bound>& bounds;
  int64_t cap;

  void require(const std::string& name, int64_t magnitude) {
    bounds.push_back({name, magnitude});
    if (magnitude > cap)
      fail(Errc::plan_overflow, name + " exceeds width capacity", magnitude);
  }

  // for products that might not even fit 64 bits
  void require_prod(const std::string& name, int64_t a, int64_t b) {
    const unsigned __int128 p =
        (unsigned __int128)(a < 0 ? -a : a) * (unsigned __int128)(b < 0 ? -b : b);
    if (p > (unsigned __int128)cap)
      fail(Errc::plan_overflow, name + " exceeds width capacity",
           p > (unsigned __int128)INT64_MAX ? INT64_MAX : int64_t(p));
    bounds.push_back({name, int64_t(p)});
  }
};

// Gate count and depth are pure functions of (rule, shape, width); traced
// once per distinct shape and memoized.
struct ShapeKey {
  uint8_t rule;
  int window, rows, cols, width;

  bool operator==(const ShapeKey&) const = default;
};

struct ShapeKeyHash {
  size_t operator()(const ShapeKey& k) const {
    size_t h = k.rule;
    h = h * 1000003u + size_t(k.window);
    h = h * 1000003u + size_t(k.rows);
    h = h * 1000003u + size_t(k.cols);
    h = h * 1000003u + size_t(k.width);
    return h;
  }
};

void eval_any(Backend& be, RuleId id, const ObliviousHandle& batch,
              std::span<const ObliviousHandle> matrix, const ExecutionPlan& p);

std::pair<size_t, size_t> traced_estimates(const ExecutionPlan& p) {
  static std::mutex mu;
  static std::unordered_map<ShapeKey, std::pair<size_t, size_t>, ShapeKeyHash>
      cache;
  const ShapeKey key{uint8_t(p.spec.id), p.spec.window, p.spec.rows,
                     p.spec.cols, p.cfg.width};
  {
    std::lock_guard lk(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  TraceBackend be;
  SessionKeys keys = be.keygen({.width = p.cfg.width});
  // Dummy inputs at the anchor value: shape is all that matters for a trace.
  const int64_t fill = p.spec.id == RuleId::r3 ? p.anchor : 0;
  if (p.spec.id == RuleId::r3) {
    std::vector<ObliviousHandle> rows;
    std::vector<int64_t> row(size_t(p.spec.cols), fill);
    for (int r = 0; r < p.spec.rows; ++r)
      rows.push_back(be.encrypt_raw(row, p.cfg.width, keys));
    eval_any(be, p.spec.id, {}, rows, p);
  } else {
    std::vector<int64_t> batch(size_t(p.spec.window), fill);
    auto h = be.encrypt_raw(batch, p.cfg.width, keys);
    eval_any(be, p.spec.id, h, {}, p);
  }
  auto result = std::make_pair(be.trace().records.size(), be.max_depth());
  std::lock_guard lk(mu);
  cache.emplace(key, result);
  return result;
}

}  // namespace

ExecutionPlan plan(const RuleSpec& spec, const FixedPointConfig& cfg) {
  spec.validate();
  cfg.validate();

  ExecutionPlan p;
  p.spec = spec;
  p.cfg = cfg;

  const int64_t cap = FixedPointConfig::width_max(cfg.width);
  const int64_t raw_lo = cfg.raw_lo();
  const int64_t raw_hi = cfg.raw_hi();
  const int64_t sample_mag = std::max(std::llabs(raw_lo), std::llabs(raw_hi));
  const int64_t range = raw_hi - raw_lo;
  BoundChecker chk{p.bounds, cap};

  chk.require("sample", sample_mag);

  switch (spec.id) {
    case RuleId::r1: {
      p.upper3 = scaled_threshold(spec.target_mean + 3 * spec.target_sd, cfg.scale);
      p.lower3 = scaled_threshold(spec.target_mean - 3 * spec.target_sd, cfg.scale);
      chk.require("negated sample", sample_mag);
      chk.require("rule-1 upper limit", std::llabs(p.upper3));
      chk.require("rule-1 lower limit", std::llabs(p.lower3));
      break;
    }
    case RuleId::r2: {
      p.upper2 = scaled_threshold(spec.target_mean + 2 * spec.target_sd, cfg.scale);
      p.lower2 = scaled_threshold(spec.target_mean - 2 * spec.target_sd, cfg.scale);
      p.range4 = scaled_threshold(4 * spec.target_sd, cfg.scale);
      chk.require("negated sample", sample_mag);
      chk.require("adjacent difference", range);
      chk.require("abs intermediate", range + 1);
      chk.require("rule-2 range limit", std::llabs(p.range4));
      chk.require("rule-2 upper limit", std::llabs(p.upper2));
      chk.require("rule-2 lower limit", std::llabs(p.lower2));
      break;
    }
    case RuleId::r3: {
      p.sigma2_raw = scaled_threshold(2 * spec.target_sd, cfg.scale);
      p.anchor = (raw_lo + raw_hi) / 2;
      const int64_t dev = std::max(raw_hi - p.anchor, p.anchor - raw_lo);
      const int64_t c = spec.cols;
      const int64_t r = spec.rows;
      chk.require("row range", range);
      chk.require("anchored deviation", dev);
      chk.require_prod("squared deviation", dev, dev);
      chk.require_prod("row sum of deviations", c, dev);
      chk.require_prod("row sum of squares", c * dev, dev);
      chk.require_prod("row SSD intermediate", c * dev, c * dev);
      chk.require_prod("column sum", r, sample_mag);
      // threshold for the SD clause: c (c-1) (2 sd scale)^2
      const unsigned __int128 thr = (unsigned __int128)c * (unsigned __int128)(c - 1) *
                                    (unsigned __int128)p.sigma2_raw *
                                    (unsigned __int128)p.sigma2_raw;
      if (thr > (unsigned __int128)cap)
        fail(Errc::plan_overflow, "rule-3 SD threshold exceeds width capacity",
             thr > (unsigned __int128)INT64_MAX ? INT64_MAX : int64_t(thr));
      p.bounds.push_back({"rule-3 SD threshold", int64_t(thr)});
      break;
    }
  }

  auto [gates, depth] = traced_estimates(p);
  p.gate_count = gates;
  p.depth = depth;
  return p;
}

namespace {

ObliviousHandle element(Backend& be, const ObliviousHandle& batch, size_t i) {
  if (batch.is_vector()) return be.slot(batch, i);
  if (i != 0) fail(Errc::shape_mismatch, "scalar handle has one element");
  return batch;
}

void check_batch_shape(const ObliviousHandle& batch, int window) {
  if (!batch.valid() || batch.length() != size_t(window))
    fail(Errc::shape_mismatch,
         "batch length does not match the rule window of " + std::to_string(window));
}

// flag_i pair for one sample against upper/lower plaintext limits
ObliviousBit outside_limits(Backend& be, const ObliviousHandle& x, int64_t upper,
                            int64_t lower) {
  ObliviousBit above = be.cmp_gt(x, upper);
  // x < lower  <=>  -x > -lower, strict
  ObliviousBit below = be.cmp_gt(be.mul_plain(x, -1), -lower);
  return be.bit_or(above, below);
}

struct Rule3RowResult {
  ObliviousHandle range;
  ObliviousBit flag;
};

Rule3RowResult rule3_row(Backend& be, std::span<const ObliviousHandle> slots,
                         const ExecutionPlan& p, int fold_workers) {
  Rule3RowResult out;
  ObliviousHandle hi = fold_workers > 1
                           ? kernels::max_vec_parallel(be, slots, fold_workers)
                           : kernels::max_vec(be, slots);
  ObliviousHandle lo = fold_workers > 1
                           ? kernels::min_vec_parallel(be, slots, fold_workers)
                           : kernels::min_vec(be, slots);
  out.range = be.sub(hi, lo);
  out.flag = kernels::sd_exceeds(be, slots, p.sigma2_raw, p.anchor);
  return out;
}

void check_matrix_shape(std::span<const ObliviousHandle> matrix,
                        const ExecutionPlan& p) {
  if (matrix.size() != size_t(p.spec.rows))
    fail(Errc::shape_mismatch, "matrix row count does not match the rule");
  for (const auto& row : matrix)
    if (!row.valid() || !row.is_vector() || row.length() != size_t(p.spec.cols))
      fail(Errc::shape_mismatch, "matrix row length does not match the rule");
}

void eval_any(Backend& be, RuleId id, const ObliviousHandle& batch,
              std::span<const ObliviousHandle> matrix, const ExecutionPlan& p) {
  switch (id) {
    case RuleId::r1: rule1_eval(be, batch, p); break;
    case RuleId::r2: rule2_eval(be, batch, p); break;
    case RuleId::r3: rule3_eval(be, matrix, p); break;
  }
}

}  // namespace

RuleVerdict rule1_eval(Backend& be, const ObliviousHandle& batch,
                       const ExecutionPlan& p) {
  check_batch_shape(batch, p.spec.window);
  std::vector<ObliviousBit> hits;
  hits.reserve(size_t(p.spec.window));
  for (int i = 0; i < p.spec.window; ++i)
    hits.push_back(outside_limits(be, element(be, batch, size_t(i)), p.upper3,
                                  p.lower3));
  RuleVerdict v;
  v.flag = kernels::any_of(be, hits);
  return v;
}

RuleVerdict rule2_eval(Backend& be, const ObliviousHandle& batch,
                       const ExecutionPlan& p) {
  if (p.spec.window < 2) fail(Errc::shape_mismatch, "rule 2 needs window >= 2");
  check_batch_shape(batch, p.spec.window);
  const int n = p.spec.window;

  std::vector<ObliviousBit> above, below;
  above.reserve(size_t(n));
  below.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    ObliviousHandle x = element(be, batch, size_t(i));
    above.push_back(be.cmp_gt(x, p.upper2));
    below.push_back(be.cmp_gt(be.mul_plain(x, -1), -p.lower2));
  }

  std::vector<ObliviousBit> hits;
  hits.reserve(size_t(3 * (n - 1)));
  for (int i = 0; i + 1 < n; ++i) {
    ObliviousHandle d = be.sub(element(be, batch, size_t(i + 1)),
                               element(be, batch, size_t(i)));
    hits.push_back(be.cmp_gt(kernels::abs_branchless(be, d), p.range4));
    hits.push_back(be.bit_and(above[size_t(i)], above[size_t(i + 1)]));
    hits.push_back(be.bit_and(below[size_t(i)], below[size_t(i + 1)]));
  }
  RuleVerdict v;
  v.flag = kernels::any_of(be, hits);
  return v;
}

RuleVerdict rule3_eval(Backend& be, std::span<const ObliviousHandle> matrix,
                       const ExecutionPlan& p) {
  check_matrix_shape(matrix, p);
  const int r = p.spec.rows;
  const int c = p.spec.cols;

  const size_t nrows = size_t(r);
  std::vector<std::vector<ObliviousHandle>> slots(nrows);
  for (int i = 0; i < r; ++i) {
    slots[size_t(i)].reserve(size_t(c));
    for (int j = 0; j < c; ++j)
      slots[size_t(i)].push_back(be.slot(matrix[size_t(i)], size_t(j)));
  }

  std::vector<ObliviousHandle> ranges(nrows);
  RuleVerdict v;
  v.row_flags.resize(size_t(r));
  for (int i = 0; i < r; ++i) {
    auto row = rule3_row(be, slots[size_t(i)], p, 1);
    ranges[size_t(i)] = row.range;
    v.row_flags[size_t(i)] = row.flag;
  }

  // Column aggregation: evaluated for its cost/bound profile, no output.
  for (int j = 0; j < c; ++j) {
    std::vector<ObliviousHandle> col;
    col.reserve(size_t(r));
    for (int i = 0; i < r; ++i) col.push_back(slots[size_t(i)][size_t(j)]);
    (void)kernels::sum_vec(be, col);
  }

  v.score = kernels::max_vec(be, ranges);
  return v;
}

RuleVerdict rule3_eval_parallel(Backend& be,
                                std::span<const ObliviousHandle> matrix,
                                const ExecutionPlan& p, int workers) {
  check_matrix_shape(matrix, p);
  if (workers <= 1) return rule3_eval(be, matrix, p);
  const int r = p.spec.rows;
  const int c = p.spec.cols;

  const size_t nrows = size_t(r);
  std::vector<std::vector<ObliviousHandle>> slots(nrows);
  for (int i = 0; i < r; ++i) {
    slots[size_t(i)].reserve(size_t(c));
    for (int j = 0; j < c; ++j)
      slots[size_t(i)].push_back(be.slot(matrix[size_t(i)], size_t(j)));
  }

  std::vector<ObliviousHandle> ranges(nrows);
  RuleVerdict v;
  v.row_flags.resize(size_t(r));
  std::exception_ptr first_error;

  // Rows are independent; when there are fewer rows than workers the folds
  // inside each row parallelize instead (level-synchronous trees).
  const int fold_workers = r >= workers ? 1 : workers;
#pragma omp parallel for num_threads(workers) schedule(dynamic) \
    if (fold_workers == 1)
  for (int i = 0; i < r; ++i) {
    try {
      auto row = rule3_row(be, slots[size_t(i)], p, fold_workers);
      ranges[size_t(i)] = row.range;
      v.row_flags[size_t(i)] = row.flag;
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  const size_t ncols = size_t(c);
  std::vector<std::vector<ObliviousHandle>> cols(ncols);
  for (int j = 0; j < c; ++j) {
    cols[size_t(j)].reserve(size_t(r));
    for (int i = 0; i < r; ++i) cols[size_t(j)].push_back(slots[size_t(i)][size_t(j)]);
  }
#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (int j = 0; j < c; ++j) {
    try {
      (void)kernels::sum_vec(be, cols[size_t(j)]);
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  v.score = kernels::max_vec_parallel(be, ranges, workers);
  return v;
}

}  // namespace obliqc::rules
