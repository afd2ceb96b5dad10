#include "chor/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/spdlog.h>

namespace chor {

void configure_logging_from_env() {
  spdlog::set_level(spdlog::level::warn);
  const char* value = std::getenv(std::string(kLogLevelEnv).c_str());
  if (!value) return;
  const auto level = spdlog::level::from_str(value);
  if (level == spdlog::level::off && std::string(value) != "off") {
    spdlog::warn("{}: unknown level '{}', using warn", kLogLevelEnv, value);
    return;
  }
  spdlog::set_level(level);
}

}  // namespace chor
