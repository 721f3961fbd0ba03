#pragma once

// Minimal stderr logging gated by ENGRAM_LEDGER_LOG (error|info|debug).

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace engram_ledger {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ENGRAM_LEDGER_LOG");
    if (!env) return LogLevel::Error;
    const std::string_view v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

inline void log_at(LogLevel lvl, std::string_view tag, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void log_error(const std::string& msg) { log_at(LogLevel::Error, "error", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::Info, "info", msg); }
inline void log_debug(const std::string& msg) { log_at(LogLevel::Debug, "debug", msg); }

}  // namespace engram_ledger
