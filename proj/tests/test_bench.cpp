// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>
#include <thread>

#include "obliqc/bench.hpp"
#include "support/test_util.hpp"

using namespace obliqc;
namespace b = obliqc::bench;

namespace {

b::SweepOptions fast_opts() {
  b::SweepOptions opts;
  opts.gate_cost = std::chrono::microseconds(2);
  opts.repetitions = 5;
  return opts;
}

}  // namespace

TEST_CASE("record invariants") {
  b::BenchRecord r;
  r.repetitions = 5;
  r.median_ns = 10;
  r.p95_ns = 20;
  CHECK_NOTHROW(r.validate());
  r.repetitions = 4;
  CHECK_THROWS_AS(r.validate(), Error);
  r.repetitions = 5;
  r.p95_ns = 5;
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("records CSV round-trips byte-identically") {
  std::vector<b::BenchRecord> records;
  b::BenchRecord r;
  r.backend = "reference";
  r.rule = "R1";
  r.phase = "compute";
  r.batch_size = 64;
  r.vector_length = 8;
  r.repetitions = 5;
  r.min_ns = 100;
  r.median_ns = 120;
  r.p95_ns = 150;
  r.peak_rss_bytes = 1 << 20;
  r.cpu_util_pct = 97.5;
  r.serialized_bytes = 4096;
  records.push_back(r);
  r.phase = "decrypt";
  r.median_ns = 80;
  r.p95_ns = 90;
  records.push_back(r);

  std::stringstream out;
  b::write_records_csv(out, records);
  const std::string once = out.str();
  CHECK(once.rfind(b::kCsvSchema, 0) == 0);

  std::stringstream in(once);
  auto parsed = b::read_records_csv(in);
  REQUIRE(parsed.size() == records.size());
  CHECK(parsed == records);

  std::stringstream again;
  b::write_records_csv(again, parsed);
  CHECK(again.str() == once);

  std::stringstream garbage("hello\nworld\n");
  CHECK_THROWS_AS(b::read_records_csv(garbage), Error);
}

TEST_CASE("batch sweep produces per-phase records with amortization") {
  Catalog catalog = default_catalog();
  const CatalogEntry& entry = catalog.at("R1");
  FixedPointConfig cfg{100, 32, entry.lo, entry.hi};
  const std::vector<uint32_t> sizes = {1, 8};
  auto records = b::sweep_batch(entry, cfg, sizes, fast_opts());
  CHECK(records.size() == 10);  // 5 phases x 2 sizes
  for (const auto& r : records) {
    CHECK_NOTHROW(r.validate());
    CHECK(r.backend == "reference");
    CHECK(r.rule == "R1");
  }
  // fixed setup cost amortizes: per-item time shrinks with the batch
  const double amortized1 = b::amortized_ns_per_item(records, 1);
  const double amortized8 = b::amortized_ns_per_item(records, 8);
  CHECK(amortized8 < amortized1);

  std::vector<uint32_t> unsorted = {8, 1};
  CHECK_THROWS_AS(b::sweep_batch(entry, cfg, unsorted, fast_opts()), Error);
}

TEST_CASE("sweeps are structurally reproducible") {
  Catalog catalog = default_catalog();
  const CatalogEntry& entry = catalog.at("R2");
  FixedPointConfig cfg{100, 32, entry.lo, entry.hi};
  const std::vector<uint32_t> sizes = {1, 4};
  auto a = b::sweep_batch(entry, cfg, sizes, fast_opts());
  auto c = b::sweep_batch(entry, cfg, sizes, fast_opts());
  REQUIRE(a.size() == c.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rule == c[i].rule);
    CHECK(a[i].phase == c[i].phase);
    CHECK(a[i].batch_size == c[i].batch_size);
  }
}

TEST_CASE("abs sweep: verified variants, gate counts and the exact CSV header") {
  auto rows = b::sweep_abs_variants(fast_opts());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].variant == "branchless");
  CHECK(rows[0].gates == 3);
  CHECK(rows[1].variant == "select");
  CHECK(rows[1].gates == 5);
  CHECK(rows[2].variant == "naive");
  CHECK(rows[2].gates == 6);
  CHECK(rows[0].gates < rows[1].gates);
  CHECK(rows[1].gates <= rows[2].gates);

  std::stringstream out;
  b::write_abs_csv(out, rows);
  std::string first_line = out.str().substr(0, out.str().find('\n'));
  CHECK(first_line == "variant,gates,median_ns,p95_ns");
}

TEST_CASE("parallel sweep records determinism-checked speedups") {
  Catalog catalog = default_catalog();
  CatalogEntry entry = catalog.at("R3");
  entry.spec.rows = 4;
  entry.spec.cols = 8;
  FixedPointConfig cfg{100, 32, entry.lo, entry.hi};
  const std::vector<int> workers = {1, 2};
  // long enough per worker count (~100 ms) that CPU-time tick quantization
  // cannot distort the utilization ratio
  b::SweepOptions opts;
  opts.gate_cost = std::chrono::microseconds(20);
  opts.repetitions = 10;
  auto records = b::sweep_parallel(entry, cfg, workers, opts);
  REQUIRE(records.size() == 2);
  CHECK(records[0].batch_size == 1);
  CHECK(records[1].batch_size == 2);
  const double hw = double(std::thread::hardware_concurrency());
  for (const auto& r : records) {
    CHECK_NOTHROW(r.validate());
    CHECK(r.cpu_util_pct <= 100.0 * hw + 50.0);  // sampling slack
  }
}

TEST_CASE("report formats") {
  std::vector<b::BenchRecord> records;
  for (int i = 0; i < 3; ++i) {
    b::BenchRecord r;
    r.backend = "reference";
    r.rule = "R1";
    r.phase = i == 0 ? "keygen" : (i == 1 ? "compute" : "decrypt");
    r.batch_size = 4;
    r.vector_length = 8;
    r.repetitions = 5;
    r.median_ns = 10;
    r.p95_ns = 12;
    records.push_back(r);
  }

  std::stringstream csv;
  b::report(records, b::ReportFormat::csv, csv);
  std::stringstream expected;
  b::write_records_csv(expected, records);
  CHECK(csv.str() == expected.str());

  std::stringstream md;
  b::report(records, b::ReportFormat::markdown, md);
  const std::string text = md.str();
  size_t rows = 0;
  for (size_t pos = 0; (pos = text.find("| reference |", pos)) != std::string::npos;
       ++pos)
    ++rows;
  CHECK(rows == records.size());  // one row per (rule, phase, batch)
  CHECK(text.find("ciphertext") != std::string::npos);

  CHECK_THROWS_AS(b::report({}, b::ReportFormat::markdown, md), Error);
}
