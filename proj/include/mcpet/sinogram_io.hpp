#pragma once

#include <filesystem>

#include "mcpet/projector.hpp"

namespace mcpet {

/*!
 * Sinogram files: `<stem>.json` header {"n_angles", "n_tangential"} and
 * `<stem>.raw`, the little-endian float32 values in detector order.
 */
void write_sinogram(const std::filesystem::path& stem, const Sinogram& s);
Sinogram read_sinogram(const std::filesystem::path& stem);

//! One row per bin: angle,tangential,value.
void write_sinogram_csv(const std::filesystem::path& file, const Sinogram& s);

}  // namespace mcpet
