#include "ffcnet/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace ffcnet {

void init_logging() {
  auto logger = spdlog::get("ffcnet");
  if (!logger) {
    logger = spdlog::stderr_color_mt("ffcnet");
    logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
  }

  const char* env = std::getenv("FFCNET_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("FFCNET_LOG='{}' not recognised, using info", level);
  }
}

}  // namespace ffcnet
