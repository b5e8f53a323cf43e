#include "isa/logging.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include <json.hpp>

namespace isa::log {

namespace {

std::atomic<Level> g_level{Level::info};
std::atomic<bool> g_json{false};
std::mutex g_mutex;

const char* level_name(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "?";
}

} // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }
void set_json(bool enabled) { g_json.store(enabled); }

void write(Level level, std::string_view msg, const std::vector<Field>& fields) {
    if (static_cast<int>(level) < static_cast<int>(g_level.load())) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_json.load()) {
        nlohmann::json j;
        j["level"] = level_name(level);
        j["msg"] = std::string(msg);
        for (const auto& [key, value] : fields) j[std::string(key)] = value;
        std::fputs(j.dump().c_str(), stderr);
        std::fputc('\n', stderr);
    } else {
        std::fprintf(stderr, "[%s] %.*s", level_name(level), static_cast<int>(msg.size()), msg.data());
        for (const auto& [key, value] : fields)
            std::fprintf(stderr, " %.*s=%s", static_cast<int>(key.size()), key.data(), value.c_str());
        std::fputc('\n', stderr);
    }
    std::fflush(stderr);
}

} // namespace isa::log
