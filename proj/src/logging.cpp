#include "lipwalk/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace lipwalk {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static auto instance = [] {
    auto l = spdlog::stderr_color_mt("lipwalk");
    l->set_level(spdlog::level::warn);
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    return l;
  }();
  return instance;
}

}  // namespace

void init_logging() {
  const char* env = std::getenv("LIPWALK_LOG");
  if (env == nullptr) return;
  const auto level = spdlog::level::from_str(env);
  logger()->set_level(level);
}

void log(LogLevel level, std::string_view message) {
  switch (level) {
    case LogLevel::Debug: logger()->debug(message); break;
    case LogLevel::Info: logger()->info(message); break;
    case LogLevel::Warn: logger()->warn(message); break;
    case LogLevel::Error: logger()->error(message); break;
  }
}

}  // namespace lipwalk
