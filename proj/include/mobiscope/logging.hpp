#pragma once

#include <string>
#include <string_view>

namespace mobiscope::log {

/// Reads MOBISCOPE_LOG (error|warn|info|debug). Unset or unknown values mean "warn".
void init_from_env();
void set_level(std::string_view level);

void debug(const std::string& message);
void info(const std::string& message);
void warn(const std::string& message);
void error(const std::string& message);

}  // namespace mobiscope::log
