#pragma once

#include <string_view>

namespace bier {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold comes from the BIER_LOG environment variable
// (error|warn|info|debug, default warn) unless overridden here.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_message(LogLevel level, std::string_view message);
inline void log_error(std::string_view m) { log_message(LogLevel::error, m); }
inline void log_warn(std::string_view m) { log_message(LogLevel::warn, m); }
inline void log_info(std::string_view m) { log_message(LogLevel::info, m); }
inline void log_debug(std::string_view m) { log_message(LogLevel::debug, m); }

}  // namespace bier
