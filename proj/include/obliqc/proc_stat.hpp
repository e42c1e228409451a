// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <thread>

namespace obliqc::proc {

/// Current resident set size of this process, bytes (0 if unreadable).
uint64_t rss_bytes();

/// Cumulative user+system CPU time of this process, nanoseconds.
uint64_t cpu_time_ns();

/// Samples VmRSS on a monitor thread every `period_ms` and keeps the peak in
/// an atomic, so readers never block the sampler.
class MemorySampler {
public:
  explicit MemorySampler(unsigned period_ms = 50);
  ~MemorySampler();

  MemorySampler(const MemorySampler&) = delete;
  MemorySampler& operator=(const MemorySampler&) = delete;

  uint64_t peak_bytes() const { return peak_.load(std::memory_order_relaxed); }
  void reset();

private:
  std::atomic<uint64_t> peak_{0};
  std::atomic<bool> stop_{false};
  unsigned period_ms_;
  std::thread thread_;
};

/// CPU utilization percent over a measured interval: 100 = one core busy.
class CpuMeter {
public:
  void start();
  double stop_and_read();  // percent

private:
  uint64_t cpu_start_ = 0;
  uint64_t wall_start_ = 0;
};

}  // namespace obliqc::proc
