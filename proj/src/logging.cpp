#include "mobiscope/logging.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace mobiscope::log {

namespace {

std::shared_ptr<spdlog::logger>& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto l = spdlog::stderr_color_mt("mobiscope");
        l->set_pattern("[%l] %v");
        l->set_level(spdlog::level::warn);
        return l;
    }();
    return instance;
}

}  // namespace

void set_level(std::string_view level) {
    auto lvl = spdlog::level::warn;
    if (level == "error") lvl = spdlog::level::err;
    else if (level == "info") lvl = spdlog::level::info;
    else if (level == "debug") lvl = spdlog::level::debug;
    logger()->set_level(lvl);
}

void init_from_env() {
    const char* env = std::getenv("MOBISCOPE_LOG");
    set_level(env ? env : "warn");
}

void debug(const std::string& message) { logger()->debug(message); }
void info(const std::string& message) { logger()->info(message); }
void warn(const std::string& message) { logger()->warn(message); }
void error(const std::string& message) { logger()->error(message); }

}  // namespace mobiscope::log
