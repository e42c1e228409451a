// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "obliqc/backend.hpp"
#include "obliqc/codec.hpp"

namespace obliqc::rules {

enum class RuleId : uint8_t { r1 = 1, r2 = 2, r3 = 3 };

std::string rule_name(RuleId id);
RuleId rule_from_name(const std::string& name);  // throws unknown_rule

/// Server-side plaintext control parameters for one rule. Never serialized
/// to the wire: the client learns rule ids and input shapes, nothing else.
struct RuleSpec {
  RuleId id = RuleId::r1;
  double target_mean = 0.0;
  double target_sd = 0.0;  // > 0
  int window = 0;          // R1/R2 sample count
  int rows = 0, cols = 0;  // R3 matrix dims

  void validate() const;
};

/// Plan-time worst-case magnitude of one named intermediate.
struct Bound {
  std::string name;
  int64_t magnitude;
};

/// Static feasibility analysis of (rule, codec) plus the plaintext
/// thresholds, computed once. Rule evaluation takes a plan, so thresholds
/// are never recomputed per request and infeasible combinations are
/// rejected before any ciphertext exists.
struct ExecutionPlan {
  RuleSpec spec;
  FixedPointConfig cfg;
  std::vector<Bound> bounds;
  size_t gate_count = 0;
  size_t depth = 0;

  // scaled-integer thresholds
  int64_t upper3 = 0, lower3 = 0;  // R1: mean +- 3 sd
  int64_t upper2 = 0, lower2 = 0;  // R2: mean +- 2 sd
  int64_t range4 = 0;              // R2: 4 sd
  int64_t sigma2_raw = 0;          // R3: 2 sd, scaled
  int64_t anchor = 0;              // R3: codec range midpoint
};

/// Computes every intermediate's worst-case magnitude and rejects the
/// combination with plan_overflow (naming the offending intermediate) if any
/// exceeds the width. Gate count and depth come from a shape-keyed trace of
/// the actual circuit.
ExecutionPlan plan(const RuleSpec& spec, const FixedPointConfig& cfg);

struct RuleVerdict {
  std::optional<ObliviousBit> flag;      // R1/R2: 1 = QC violation
  std::optional<ObliviousHandle> score;  // R3: encoded decimal, max row range
  std::vector<ObliviousBit> row_flags;   // R3: per-row SD flags
};

/// 1_3s: flag = OR_i [x_i > mean + 3 sd  or  x_i < mean - 3 sd].
/// All comparisons strict, against plaintext thresholds.
RuleVerdict rule1_eval(Backend& be, const ObliviousHandle& batch,
                       const ExecutionPlan& plan);

/// R_4s + 2_2s: any adjacent |x_{i+1} - x_i| > 4 sd, or two consecutive
/// samples both beyond the same 2 sd limit.
RuleVerdict rule2_eval(Backend& be, const ObliviousHandle& batch,
                       const ExecutionPlan& plan);

/// Per row: range = max - min and an SD flag (sample SD > 2 sd); per-column
/// sums are evaluated for their bound profile but carry no output; the score
/// is the maximum row range.
RuleVerdict rule3_eval(Backend& be, std::span<const ObliviousHandle> matrix,
                       const ExecutionPlan& plan);

/// Same circuit with rows (and the folds within rows) distributed over an
/// OpenMP team. Decrypted outputs are identical to rule3_eval for any
/// worker count.
RuleVerdict rule3_eval_parallel(Backend& be,
                                std::span<const ObliviousHandle> matrix,
                                const ExecutionPlan& plan, int workers);

}  // namespace obliqc::rules
