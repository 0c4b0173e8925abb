#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "mcpet/projector.hpp"
#include "mcpet/simulate.hpp"

namespace mcpet {

struct ListModeFile
{
    ListModeData data;
    std::uint64_t seed = 0;
    nlohmann::json model_descriptor;
    ProjectorConfig projector;
};

/*!
 * `<stem>.csv` with header `detector,time` (times printed with 17
 * significant digits, so they round-trip exactly) and `<stem>.json` holding
 * {"seed", "n", "model_descriptor", "projector_config"}.
 */
void write_listmode(const std::filesystem::path& stem, const ListModeFile& file);
ListModeFile read_listmode(const std::filesystem::path& stem);

nlohmann::json projector_config_to_json(const ProjectorConfig& c);
ProjectorConfig projector_config_from_json(const nlohmann::json& j);

}  // namespace mcpet
