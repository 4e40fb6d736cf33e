#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace mib {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

// Level comes from MI_LOG_LEVEL (quiet|info|debug), default info.
inline LogLevel& log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("MI_LOG_LEVEL");
    if (env == nullptr) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_message(LogLevel at, const std::string& msg) {
  if (static_cast<int>(log_level()) < static_cast<int>(at)) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << msg << "\n";
}

inline void log_info(const std::string& msg) {
  log_message(LogLevel::kInfo, msg);
}

inline void log_debug(const std::string& msg) {
  log_message(LogLevel::kDebug, msg);
}

}  // namespace mib
