#pragma once

#include <string_view>

namespace lipwalk {

enum class LogLevel { Debug, Info, Warn, Error };

/// Sets the stderr log threshold from LIPWALK_LOG (trace, debug, info, warn,
/// error, off). Defaults to warn.
void init_logging();

void log(LogLevel level, std::string_view message);

}  // namespace lipwalk
