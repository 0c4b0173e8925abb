#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mcpet/motion.hpp"

namespace mcpet {

/*!
 * Velocity files: `<stem>.raw` holds the vx plane followed by the vy plane
 * (little-endian float32, image layout), `<stem>.json` the grid sidecar.
 */
void write_velocity(const std::filesystem::path& stem, const VelocityField& v);
VelocityField read_velocity(const std::filesystem::path& stem);

/*!
 * Motion descriptors:
 *   {"type":"static"}
 *   {"type":"translation","a":..,"b":..,"stop":..}
 *   {"type":"diffeo","velocity_file":..,"steps":32}
 *   {"type":"diffeo","preset":"swirl","rotation":..,"expansion":..,"steps":32}
 *   {"type":"gated","times":[..],"models":[..]}
 * Relative velocity files resolve against `base_dir`; presets are built on
 * `geom`.
 */
MotionModel motion_from_json(const nlohmann::json& j, const GridGeometry& geom,
                             const std::filesystem::path& base_dir = {});

/*!
 * Descriptor for `model`. Diffeomorphic velocity fields are written next to
 * the descriptor as `<dir>/<name>[_gate<s>]_velocity`.
 */
nlohmann::json motion_to_json(const MotionModel& model, const std::filesystem::path& dir,
                              const std::string& name);

}  // namespace mcpet
