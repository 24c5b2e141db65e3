#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "oikg/synthenv.hpp"

namespace oikg::io {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path);
/// Creates parent directories; throws IoError naming the path on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Infinite values are written as the string "inf".
json number_or_inf(double v);
double parse_number_or_inf(const json& j);

json environment_to_json(const Environment& env);
/// Validates the environment schema; errors carry "<source>:<line>: ...".
Environment parse_environment(std::string_view text, const std::string& source = "<env>");
void save_environment(const Environment& env, const std::filesystem::path& path);
Environment load_environment(const std::filesystem::path& path);

json episode_to_json(const Episode& ep);
json episodes_to_json(const std::vector<Episode>& episodes);
/// Validates against the loaded environments (env index, gt path, masks, tokens).
std::vector<Episode> parse_episodes(std::string_view text, const std::vector<Environment>& envs,
                                    const std::string& source = "<episodes>");
std::vector<Episode> load_episodes(const std::filesystem::path& path, const std::vector<Environment>& envs);

json vocabulary_json();

/// Stable text form used for files: 2-space indent, trailing newline.
std::string dump(const json& j);

}  // namespace oikg::io
