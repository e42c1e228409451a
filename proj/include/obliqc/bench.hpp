// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <iosfwd>

#include "obliqc/catalog.hpp"
#include "obliqc/reference_backend.hpp"
#include "obliqc/rules.hpp"

namespace obliqc::bench {

/// One measured phase. Wall-time stats are over `repetitions` timed runs
/// after one discarded warm-up.
struct BenchRecord {
  std::string backend;
  std::string rule;
  std::string phase;  // keygen | context | encrypt | compute | decrypt
  uint32_t batch_size = 1;
  uint32_t vector_length = 0;
  uint32_t repetitions = 5;
  uint64_t min_ns = 0;
  uint64_t median_ns = 0;
  uint64_t p95_ns = 0;
  uint64_t peak_rss_bytes = 0;
  double cpu_util_pct = 0.0;
  uint64_t serialized_bytes = 0;

  void validate() const;  // repetitions >= 5, median <= p95

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

inline constexpr const char* kCsvSchema = "# obliqc-bench-csv v1";

void write_records_csv(std::ostream& out, std::span<const BenchRecord> records);
std::vector<BenchRecord> read_records_csv(std::istream& in);

struct SweepOptions {
  uint64_t seed = 1;
  uint32_t repetitions = 5;
  std::chrono::nanoseconds gate_cost{10'000};  // synthetic per-gate cost
  // diff-key setting: a fresh key session per input set instead of one per
  // batch, so the keygen phase records the per-item key-change cost
  bool diff_key = false;
};

/// Per-phase timings for one rule across batch sizes (sizes must be sorted
/// ascending). The timed path is verified against the plaintext oracle in
/// this process before any timing run.
std::vector<BenchRecord> sweep_batch(const CatalogEntry& entry,
                                     const FixedPointConfig& cfg,
                                     std::span<const uint32_t> sizes,
                                     const SweepOptions& opts);

/// Amortized per-item compute+encrypt+decrypt+setup time for one batch size,
/// derived from a record set produced by sweep_batch.
double amortized_ns_per_item(std::span<const BenchRecord> records, uint32_t batch);

struct AbsRow {
  std::string variant;
  uint64_t gates = 0;
  uint64_t median_ns = 0;
  uint64_t p95_ns = 0;
};

/// Gate counts (trace backend) and timings (reference backend with the
/// synthetic gate cost) for the three abs variants. Variants are checked
/// output-equivalent before timing.
std::vector<AbsRow> sweep_abs_variants(const SweepOptions& opts);
void write_abs_csv(std::ostream& out, std::span<const AbsRow> rows);

/// Speedup curve for the parallel rule-3 path across worker counts, with a
/// decrypted-verdict determinism cross-check against workers=1.
std::vector<BenchRecord> sweep_parallel(const CatalogEntry& entry,
                                        const FixedPointConfig& cfg,
                                        std::span<const int> worker_counts,
                                        const SweepOptions& opts);

enum class ReportFormat { csv, markdown };

/// Renders records (csv: identical to write_records_csv; markdown: one row
/// per (rule, phase, batch-size) plus a key/ciphertext size section).
/// Empty input is an error — never an empty file.
void report(std::span<const BenchRecord> records, ReportFormat format,
            std::ostream& out);

}  // namespace obliqc::bench
