#pragma once

#include <spdlog/spdlog.h>

namespace ffcnet {

/// Sets the default logger level from FFCNET_LOG (error, warn, info, debug;
/// default info). Unknown values fall back to info with a warning.
void init_logging();

}  // namespace ffcnet
