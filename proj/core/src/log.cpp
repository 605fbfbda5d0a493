#include "bier/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string>

namespace bier {

namespace {

LogLevel level_from_env() {
  const char* env = std::getenv("BIER_LOG");
  if (env == nullptr) return LogLevel::warn;
  const std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> level{static_cast<int>(level_from_env())};
  return level;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

void set_log_level(LogLevel level) { level_slot().store(static_cast<int>(level)); }

LogLevel log_level() { return static_cast<LogLevel>(level_slot().load()); }

void log_message(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) > level_slot().load()) return;
  std::cerr << "[bier " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace bier
