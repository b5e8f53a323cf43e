#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace isa::log {

enum class Level { debug, info, warn, error };

void set_level(Level level);
Level level();

// When enabled, every line is a JSON object {"level":...,"msg":...,...}.
void set_json(bool enabled);

using Field = std::pair<std::string_view, std::string>;

void write(Level level, std::string_view msg, const std::vector<Field>& fields = {});

inline void debug(std::string_view msg, const std::vector<Field>& fields = {}) { write(Level::debug, msg, fields); }
inline void info(std::string_view msg, const std::vector<Field>& fields = {}) { write(Level::info, msg, fields); }
inline void warn(std::string_view msg, const std::vector<Field>& fields = {}) { write(Level::warn, msg, fields); }
inline void error(std::string_view msg, const std::vector<Field>& fields = {}) { write(Level::error, msg, fields); }

} // namespace isa::log
