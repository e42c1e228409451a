// SPDX-License-Identifier: Apache-2.0
#include "obliqc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "obliqc/kernels.hpp"
#include "obliqc/proc_stat.hpp"
#include "obliqc/trace_backend.hpp"

namespace obliqc::bench {

namespace {

uint64_t now_ns() {
  return uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now().time_since_epoch())
                      .count());
}

struct Stats {
  uint64_t min, median, p95;
};

Stats summarize(std::vector<uint64_t> samples) {
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double q) {
    size_t i = size_t(std::ceil(q * double(samples.size()))) - 1;
    return samples[std::min(i, samples.size() - 1)];
  };
  return {samples.front(), rank(0.50), rank(0.95)};
}

// xorshift-style mixer; good enough for sample generation
struct Rng {
  uint64_t s;
  uint64_t next() {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  int64_t uniform(int64_t lo, int64_t hi) {  // inclusive
    return lo + int64_t(next() % uint64_t(hi - lo + 1));
  }
};

// Plaintext oracle for the timed path, kept local to the harness: every
// timed configuration is checked against it in-process before timing.
bool oracle_r1(std::span<const int64_t> xs, const rules::ExecutionPlan& p) {
  for (int64_t x : xs)
    if (x > p.upper3 || x < p.lower3) return true;
  return false;
}

bool oracle_r2(std::span<const int64_t> xs, const rules::ExecutionPlan& p) {
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    if (std::llabs(xs[i + 1] - xs[i]) > p.range4) return true;
    if (xs[i] > p.upper2 && xs[i + 1] > p.upper2) return true;
    if (xs[i] < p.lower2 && xs[i + 1] < p.lower2) return true;
  }
  return false;
}

}  // namespace

void BenchRecord::validate() const {
  if (repetitions < 5)
    fail(Errc::config_error, "bench records need at least 5 repetitions");
  if (median_ns > p95_ns)
    fail(Errc::config_error, "median above p95 in a bench record");
}

void write_records_csv(std::ostream& out, std::span<const BenchRecord> records) {
  out << kCsvSchema << "\n";
  out << "backend,rule,phase,batch_size,vector_length,repetitions,min_ns,"
         "median_ns,p95_ns,peak_rss_bytes,cpu_util_pct,serialized_bytes\n";
  for (const auto& r : records) {
    out << r.backend << ',' << r.rule << ',' << r.phase << ',' << r.batch_size
        << ',' << r.vector_length << ',' << r.repetitions << ',' << r.min_ns
        << ',' << r.median_ns << ',' << r.p95_ns << ',' << r.peak_rss_bytes
        << ',' << r.cpu_util_pct << ',' << r.serialized_bytes << "\n";
  }
}

std::vector<BenchRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvSchema)
    fail(Errc::malformed_payload, "not an obliqc bench CSV (missing schema line)");
  if (!std::getline(in, line))
    fail(Errc::malformed_payload, "missing CSV column header");
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    auto next = [&]() {
      if (!std::getline(ss, cell, ','))
        fail(Errc::malformed_payload, "short CSV row");
      return cell;
    };
    BenchRecord r;
    r.backend = next();
    r.rule = next();
    r.phase = next();
    r.batch_size = uint32_t(std::stoul(next()));
    r.vector_length = uint32_t(std::stoul(next()));
    r.repetitions = uint32_t(std::stoul(next()));
    r.min_ns = std::stoull(next());
    r.median_ns = std::stoull(next());
    r.p95_ns = std::stoull(next());
    r.peak_rss_bytes = std::stoull(next());
    r.cpu_util_pct = std::stod(next());
    r.serialized_bytes = std::stoull(next());
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

struct PhaseTimer {
  std::vector<uint64_t> keygen, context, encrypt, compute, decrypt;
};

}  // namespace

std::vector<BenchRecord> sweep_batch(const CatalogEntry& entry,
                                     const FixedPointConfig& cfg,
                                     std::span<const uint32_t> sizes,
                                     const SweepOptions& opts) {
  for (size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] < sizes[i - 1])
      fail(Errc::config_error, "batch sizes must be sorted ascending");
  if (entry.spec.id == rules::RuleId::r3)
    fail(Errc::config_error, "batch sweeps cover the vector rules");

  rules::ExecutionPlan plan = rules::plan(entry.spec, cfg);
  const int n = entry.spec.window;
  const int64_t lo = cfg.raw_lo(), hi = cfg.raw_hi();

  proc::MemorySampler mem;
  std::vector<BenchRecord> records;

  for (uint32_t batch : sizes) {
    ReferenceBackend be({.gate_cost = opts.gate_cost});

    // oracle check of the exact path about to be timed
    {
      Rng rng{opts.seed ^ batch};
      SessionKeys keys = be.keygen({.width = cfg.width});  // oracle session
      std::vector<int64_t> xs(size_t(n), 0);
      for (auto& x : xs) x = rng.uniform(lo, hi);
      auto h = be.encrypt_raw(xs, cfg.width, keys);
      rules::RuleVerdict v = entry.spec.id == rules::RuleId::r1
                                 ? rules::rule1_eval(be, h, plan)
                                 : rules::rule2_eval(be, h, plan);
      const bool expect = entry.spec.id == rules::RuleId::r1
                              ? oracle_r1(xs, plan)
                              : oracle_r2(xs, plan);
      if (be.decrypt_bit(*v.flag, keys) != int(expect))
        fail(Errc::config_error, "timed path disagrees with the oracle");
    }

    PhaseTimer t;
    uint64_t ser_bytes = 0;
    mem.reset();
    proc::CpuMeter cpu;
    cpu.start();

    for (uint32_t rep = 0; rep <= opts.repetitions; ++rep) {  // rep 0 = warm-up
      Rng rng{opts.seed + rep};
      std::vector<std::vector<int64_t>> inputs(batch);
      for (auto& xs : inputs) {
        xs.resize(size_t(n));
        for (auto& x : xs) x = rng.uniform(lo, hi);
      }

      uint64_t t0 = now_ns();
      std::vector<SessionKeys> keyring;
      keyring.push_back(be.keygen({.width = cfg.width}));
      if (opts.diff_key)
        for (uint32_t i = 1; i < batch; ++i)
          keyring.push_back(be.keygen({.width = cfg.width}));
      uint64_t t1 = now_ns();
      auto artifacts = be.export_artifacts(keyring.front());
      uint64_t t2 = now_ns();

      auto keys_for = [&](size_t i) -> const SessionKeys& {
        return keyring[opts.diff_key ? i : 0];
      };
      std::vector<ObliviousHandle> handles;
      handles.reserve(batch);
      uint64_t t3 = now_ns();
      for (size_t i = 0; i < inputs.size(); ++i)
        handles.push_back(be.encrypt_raw(inputs[i], cfg.width, keys_for(i)));
      uint64_t t4 = now_ns();

      std::vector<rules::RuleVerdict> verdicts;
      verdicts.reserve(batch);
      for (const auto& h : handles)
        verdicts.push_back(entry.spec.id == rules::RuleId::r1
                               ? rules::rule1_eval(be, h, plan)
                               : rules::rule2_eval(be, h, plan));
      uint64_t t5 = now_ns();

      int or_all = 0;
      for (size_t i = 0; i < verdicts.size(); ++i)
        or_all |= be.decrypt_bit(*verdicts[i].flag, keys_for(i));
      uint64_t t6 = now_ns();
      (void)or_all;

      if (rep == 0) {
        for (const auto& [name, blob] : artifacts) ser_bytes += blob.size();
        for (const auto& h : handles) ser_bytes += be.serialize_handle(h).size();
        continue;  // warm-up excluded from stats
      }
      t.keygen.push_back(t1 - t0);
      t.context.push_back(t2 - t1);
      t.encrypt.push_back(t4 - t3);
      t.compute.push_back(t5 - t4);
      t.decrypt.push_back(t6 - t5);
    }

    const double cpu_pct = cpu.stop_and_read();
    const uint64_t peak = mem.peak_bytes();
    auto push = [&](const char* phase, const std::vector<uint64_t>& samples) {
      Stats s = summarize(samples);
      BenchRecord r;
      r.backend = opts.diff_key ? "reference(diff-key)" : "reference";
      r.rule = rules::rule_name(entry.spec.id);
      r.phase = phase;
      r.batch_size = batch;
      r.vector_length = uint32_t(n);
      r.repetitions = opts.repetitions;
      r.min_ns = s.min;
      r.median_ns = s.median;
      r.p95_ns = s.p95;
      r.peak_rss_bytes = peak;
      r.cpu_util_pct = cpu_pct;
      r.serialized_bytes = ser_bytes;
      r.validate();
      records.push_back(std::move(r));
    };
    push("keygen", t.keygen);
    push("context", t.context);
    push("encrypt", t.encrypt);
    push("compute", t.compute);
    push("decrypt", t.decrypt);
  }
  return records;
}

double amortized_ns_per_item(std::span<const BenchRecord> records, uint32_t batch) {
  uint64_t total = 0;
  bool found = false;
  for (const auto& r : records) {
    if (r.batch_size != batch) continue;
    total += r.median_ns;
    found = true;
  }
  if (!found) fail(Errc::config_error, "no records for that batch size");
  return double(total) / double(batch);
}

std::vector<AbsRow> sweep_abs_variants(const SweepOptions& opts) {
  using AbsFn = ObliviousHandle (*)(Backend&, const ObliviousHandle&);
  struct Variant {
    const char* name;
    AbsFn fn;
  };
  const Variant variants[] = {
      {"branchless", &kernels::abs_branchless},
      {"select", &kernels::abs_select},
      {"naive", &kernels::abs_naive},
  };

  // output equivalence before any timing
  {
    ReferenceBackend be;
    SessionKeys keys = be.keygen({.width = 16});
    Rng rng{opts.seed};
    for (int i = 0; i < 20000; ++i) {
      const int64_t x = rng.uniform(-10000, 10000);
      auto h = be.encrypt_raw(std::span<const int64_t>(&x, 1), 16, keys);
      const int64_t expect = std::llabs(x);
      for (const auto& v : variants) {
        auto r = v.fn(be, h);
        if (be.decrypt_raw(r, keys)[0] != expect)
          fail(Errc::config_error, std::string("abs variant diverged: ") + v.name);
      }
    }
  }

  std::vector<AbsRow> rows;
  for (const auto& v : variants) {
    AbsRow row;
    row.variant = v.name;
    {
      TraceBackend tb;
      SessionKeys keys = tb.keygen({.width = 16});
      int64_t x = -525;
      auto h = tb.encrypt_raw(std::span<const int64_t>(&x, 1), 16, keys);
      (void)v.fn(tb, h);
      row.gates = tb.trace().records.size();
    }
    ReferenceBackend be({.gate_cost = opts.gate_cost});
    SessionKeys keys = be.keygen({.width = 16});
    Rng rng{opts.seed + 17};
    std::vector<uint64_t> samples;
    for (uint32_t rep = 0; rep <= opts.repetitions; ++rep) {
      const int64_t x = rng.uniform(-10000, 10000);
      auto h = be.encrypt_raw(std::span<const int64_t>(&x, 1), 16, keys);
      uint64_t t0 = now_ns();
      auto r = v.fn(be, h);
      uint64_t t1 = now_ns();
      (void)r;
      if (rep > 0) samples.push_back(t1 - t0);
    }
    Stats s = summarize(samples);
    row.median_ns = s.median;
    row.p95_ns = s.p95;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_abs_csv(std::ostream& out, std::span<const AbsRow> rows) {
  out << "variant,gates,median_ns,p95_ns\n";
  for (const auto& r : rows)
    out << r.variant << ',' << r.gates << ',' << r.median_ns << ',' << r.p95_ns
        << "\n";
}

std::vector<BenchRecord> sweep_parallel(const CatalogEntry& entry,
                                        const FixedPointConfig& cfg,
                                        std::span<const int> worker_counts,
                                        const SweepOptions& opts) {
  if (entry.spec.id != rules::RuleId::r3)
    fail(Errc::config_error, "the parallel sweep covers rule 3");
  rules::ExecutionPlan plan = rules::plan(entry.spec, cfg);
  const int rows_n = entry.spec.rows, cols_n = entry.spec.cols;
  const int64_t lo = cfg.raw_lo(), hi = cfg.raw_hi();

  ReferenceBackend be({.gate_cost = opts.gate_cost});
  SessionKeys keys = be.keygen({.width = cfg.width});

  Rng rng{opts.seed};
  std::vector<ObliviousHandle> matrix;
  for (int i = 0; i < rows_n; ++i) {
    std::vector<int64_t> row(size_t(cols_n), 0);
    for (auto& x : row) x = rng.uniform(lo, hi);
    matrix.push_back(be.encrypt_raw(row, cfg.width, keys));
  }

  // determinism cross-check against the serial path, before timing
  auto decrypt_verdict = [&](const rules::RuleVerdict& v) {
    std::pair<int64_t, std::vector<int>> out;
    out.first = be.decrypt_raw(*v.score, keys)[0];
    for (const auto& f : v.row_flags) out.second.push_back(be.decrypt_bit(f, keys));
    return out;
  };
  const auto baseline = decrypt_verdict(rules::rule3_eval(be, matrix, plan));
  for (int w : worker_counts) {
    const auto got = decrypt_verdict(rules::rule3_eval_parallel(be, matrix, plan, w));
    if (got != baseline)
      fail(Errc::config_error,
           "parallel verdict diverged at workers=" + std::to_string(w));
  }

  proc::MemorySampler mem;
  std::vector<BenchRecord> records;
  for (int w : worker_counts) {
    std::vector<uint64_t> samples;
    mem.reset();
    proc::CpuMeter cpu;
    cpu.start();
    for (uint32_t rep = 0; rep <= opts.repetitions; ++rep) {
      uint64_t t0 = now_ns();
      auto v = rules::rule3_eval_parallel(be, matrix, plan, w);
      uint64_t t1 = now_ns();
      (void)v;
      if (rep > 0) samples.push_back(t1 - t0);
    }
    const double cpu_pct = cpu.stop_and_read();
    Stats s = summarize(samples);
    BenchRecord r;
    r.backend = "reference";
    r.rule = "R3";
    r.phase = "compute";
    r.batch_size = uint32_t(w);  // worker count doubles as the sweep variable
    r.vector_length = uint32_t(cols_n);
    r.repetitions = opts.repetitions;
    r.min_ns = s.min;
    r.median_ns = s.median;
    r.p95_ns = s.p95;
    r.peak_rss_bytes = mem.peak_bytes();
    r.cpu_util_pct = cpu_pct;
    r.serialized_bytes = 0;
    r.validate();
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

// Reference magnitudes for a CKKS-class backend, for the size section of the
// markdown report. Measured values sit next to these when an external
// backend contributes records; they are context, never assertions.
struct SizeRef {
  const char* artifact;
  const char* magnitude;
};
constexpr SizeRef kCkksClassSizes[] = {
    {"crypto context", "~1 KB"},
    {"public key", "~19 MB"},
    {"multiplication key", "~57 MB"},
    {"one ciphertext batch", "~14 MB"},
};

}  // namespace

void report(std::span<const BenchRecord> records, ReportFormat format,
            std::ostream& out) {
  if (records.empty())
    fail(Errc::config_error, "refusing to render an empty record set");
  if (format == ReportFormat::csv) {
    write_records_csv(out, records);
    return;
  }
  out << "# Benchmark report\n\n";
  out << "| backend | rule | phase | batch | veclen | median | p95 | rss | cpu% | bytes |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : records) {
    out << "| " << r.backend << " | " << r.rule << " | " << r.phase << " | "
        << r.batch_size << " | " << r.vector_length << " | " << r.median_ns
        << " ns | " << r.p95_ns << " ns | " << r.peak_rss_bytes << " | "
        << r.cpu_util_pct << " | " << r.serialized_bytes << " |\n";
  }
  out << "\n## Key and ciphertext sizes\n\n";
  bool external = false;
  uint64_t measured = 0;
  for (const auto& r : records) {
    if (r.backend != "reference" && r.backend.rfind("trace", 0) != 0) {
      external = true;
      measured = std::max(measured, r.serialized_bytes);
    }
  }
  out << "| artifact | CKKS-class magnitude | measured |\n|---|---|---|\n";
  for (const auto& ref : kCkksClassSizes)
    out << "| " << ref.artifact << " | " << ref.magnitude << " | "
        << (external ? std::to_string(measured) + " B (max observed)" : "n/a")
        << " |\n";
  if (!external)
    out << "\nNo external backend contributed records; the reference backend's "
           "artifacts serialize to zero bytes.\n";
}

}  // namespace obliqc::bench
