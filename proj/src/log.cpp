// SPDX-License-Identifier: Apache-2.0
#include "obliqc/log.hpp"

#include <atomic>
#include <mutex>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace obliqc::log {

namespace {

Level from_env() {
  const char* v = std::getenv("OBLIQC_LOG");
  if (!v) return Level::warn;
  if (std::strcmp(v, "error") == 0) return Level::error;
  if (std::strcmp(v, "warn") == 0) return Level::warn;
  if (std::strcmp(v, "info") == 0) return Level::info;
  if (std::strcmp(v, "debug") == 0) return Level::debug;
  return Level::warn;
}

std::atomic<int>& threshold_ref() {
  static std::atomic<int> level{int(from_env())};
  return level;
}

std::mutex& sink_mu() {
  static std::mutex mu;
  return mu;
}

std::function<void(Level, const std::string&)>& sink_ref() {
  static std::function<void(Level, const std::string&)> sink;
  return sink;
}

}  // namespace

Level threshold() { return Level(threshold_ref().load(std::memory_order_relaxed)); }

void set_threshold(Level level) {
  threshold_ref().store(int(level), std::memory_order_relaxed);
}

void set_sink(std::function<void(Level, const std::string&)> sink) {
  std::lock_guard lk(sink_mu());
  sink_ref() = std::move(sink);
}

void write(Level level, const std::string& msg) {
  if (int(level) > int(threshold())) return;
  {
    std::lock_guard lk(sink_mu());
    if (sink_ref()) {
      sink_ref()(level, msg);
      return;
    }
  }
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[obliqc:%s] %s\n", names[int(level)], msg.c_str());
}

}  // namespace obliqc::log
