// SPDX-License-Identifier: Apache-2.0
#include "obliqc/proc_stat.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>

namespace obliqc::proc {

uint64_t rss_bytes() {
  FILE* f = std::fopen("/proc/self/statm", "r");
  if (!f) return 0;
  unsigned long size = 0, resident = 0;
  int n = std::fscanf(f, "%lu %lu", &size, &resident);
  std::fclose(f);
  if (n != 2) return 0;
  return uint64_t(resident) * uint64_t(sysconf(_SC_PAGESIZE));
}

uint64_t cpu_time_ns() {
  rusage ru{};
  if (getrusage(RUSAGE_SELF, &ru) != 0) return 0;
  auto to_ns = [](const timeval& tv) {
    return uint64_t(tv.tv_sec) * 1'000'000'000ull + uint64_t(tv.tv_usec) * 1'000ull;
  };
  return to_ns(ru.ru_utime) + to_ns(ru.ru_stime);
}

MemorySampler::MemorySampler(unsigned period_ms) : period_ms_(period_ms) {
  peak_.store(rss_bytes());
  thread_ = std::thread([this] {
    while (!stop_.load(std::memory_order_relaxed)) {
      const uint64_t now = rss_bytes();
      uint64_t prev = peak_.load(std::memory_order_relaxed);
      while (now > prev &&
             !peak_.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(period_ms_));
    }
  });
}

MemorySampler::~MemorySampler() {
  stop_.store(true);
  if (thread_.joinable()) thread_.join();
}

void MemorySampler::reset() { peak_.store(rss_bytes()); }

void CpuMeter::start() {
  cpu_start_ = cpu_time_ns();
  wall_start_ = uint64_t(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

double CpuMeter::stop_and_read() {
  const uint64_t cpu = cpu_time_ns() - cpu_start_;
  const uint64_t wall =
      uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
                   .count()) -
      wall_start_;
  if (wall == 0) return 0.0;
  return 100.0 * double(cpu) / double(wall);
}

}  // namespace obliqc::proc
