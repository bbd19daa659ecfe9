#include "latentbench/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

namespace latentbench {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("latentbench");
    l->set_level(spdlog::level::warn);
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *logger;
}

}  // namespace latentbench
