#pragma once

// Library logger. The level comes from the LPCNET_LOG environment variable
// (trace, debug, info, warn, error, critical, off); default warn.

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace lpcnet {

inline spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto l = std::make_shared<spdlog::logger>("lpcnet", sink);
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("LPCNET_LOG");
    l->set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
  }();
  return *instance;
}

}  // namespace lpcnet
