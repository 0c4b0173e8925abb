#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mcpet/image.hpp"

namespace mcpet {

/*!
 * Image files are a raw little-endian float32 array, row-major (y outer,
 * x inner), stored as `<stem>.raw`, next to a JSON sidecar `<stem>.json`
 * holding {"nx", "ny", "extent": [x_min, x_max, y_min, y_max]}.
 */
void write_image(const std::filesystem::path& stem, const GridGeometry& geom,
                 std::span<const double> values);
void write_image(const std::filesystem::path& stem, const DensityImage& img);

GridGeometry read_image_geometry(const std::filesystem::path& stem);
GridFunction read_grid_function(const std::filesystem::path& stem);
DensityImage read_density(const std::filesystem::path& stem);

//! 8-bit binary PGM, min-max scaled; a constant image maps to 0.
void write_pgm(const std::filesystem::path& file, const GridGeometry& geom,
               std::span<const double> values);

// Little-endian float32 helpers shared by the other file formats.
void write_f32_le(const std::filesystem::path& file, std::span<const double> values);
std::vector<double> read_f32_le(const std::filesystem::path& file,
                                std::size_t expected_count);

std::filesystem::path with_suffix(const std::filesystem::path& stem,
                                  const char* suffix);

}  // namespace mcpet
