#pragma once

#include <string_view>

namespace chor {

inline constexpr std::string_view kLogLevelEnv = "CHOR_LOG_LEVEL";

/// Sets the spdlog level from CHOR_LOG_LEVEL (trace, debug, info, warn,
/// error, critical, off). Unset or unknown values leave the level at warn.
void configure_logging_from_env();

}  // namespace chor
