#pragma once

#include <filesystem>

#include <json.hpp>

namespace mcpet {

//! Parses a JSON file; IoError on a missing file or malformed content.
nlohmann::json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const nlohmann::json& value);

}  // namespace mcpet
