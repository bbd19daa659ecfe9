#pragma once

#include <spdlog/spdlog.h>

namespace latentbench {

/// Library-wide logger (stderr). Quiet by default: warnings and above.
spdlog::logger& log();

}  // namespace latentbench
