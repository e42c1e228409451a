// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

namespace obliqc::log {

enum class Level : int { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold comes from OBLIQC_LOG (error|warn|info|debug), default warn.
Level threshold();
void set_threshold(Level level);

/// Redirects log lines (tests use this to scan them); nullptr restores stderr.
void set_sink(std::function<void(Level, const std::string&)> sink);

void write(Level level, const std::string& msg);

inline void error(const std::string& m) { write(Level::error, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void debug(const std::string& m) { write(Level::debug, m); }

}  // namespace obliqc::log
