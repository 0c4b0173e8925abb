#include "mcpet/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mcpet/errors.hpp"
#include "mcpet/json_io.hpp"

namespace mcpet {
namespace {

using nlohmann::json;

std::uint32_t to_le(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

}  // namespace

json read_json_file(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + file.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& file, const json& value)
{
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write " + file.string());
    out << value.dump(2) << '\n';
    if (!out)
        throw IoError("short write to " + file.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix)
{
    auto p = stem;
    p += suffix;
    return p;
}

void write_f32_le(const std::filesystem::path& file, std::span<const double> values)
{
    std::ofstream out(file, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + file.string());
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        words[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    out.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!out)
        throw IoError("short write to " + file.string());
}

std::vector<double> read_f32_le(const std::filesystem::path& file, std::size_t expected_count)
{
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in)
        throw IoError("cannot open " + file.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected_count * sizeof(float))
        throw IoError(file.string() + ": expected " + std::to_string(expected_count)
                      + " float32 values, file has " + std::to_string(bytes) + " bytes");
    in.seekg(0);
    std::vector<std::uint32_t> words(expected_count);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
    std::vector<double> out(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i)
        out[i] = static_cast<double>(std::bit_cast<float>(to_le(words[i])));
    return out;
}

void write_image(const std::filesystem::path& stem, const GridGeometry& geom,
                 std::span<const double> values)
{
    if (values.size() != geom.size())
        throw GeometryMismatch("write_image: value count does not match the grid");
    json meta{{"nx", geom.nx()},
              {"ny", geom.ny()},
              {"extent", {geom.x_min(), geom.x_max(), geom.y_min(), geom.y_max()}}};
    write_json_file(with_suffix(stem, ".json"), meta);
    write_f32_le(with_suffix(stem, ".raw"), values);
}

void write_image(const std::filesystem::path& stem, const DensityImage& img)
{
    write_image(stem, img.geometry(), img.values());
}

GridGeometry read_image_geometry(const std::filesystem::path& stem)
{
    const auto meta = read_json_file(with_suffix(stem, ".json"));
    try {
        const auto ext = meta.at("extent").get<std::vector<double>>();
        if (ext.size() != 4)
            throw IoError("image sidecar extent must have 4 entries");
        return GridGeometry(meta.at("nx").get<std::size_t>(), meta.at("ny").get<std::size_t>(),
                            ext[0], ext[1], ext[2], ext[3]);
    } catch (const json::exception& e) {
        throw IoError("bad image sidecar " + stem.string() + ": " + e.what());
    }
}

GridFunction read_grid_function(const std::filesystem::path& stem)
{
    const auto geom = read_image_geometry(stem);
    return GridFunction(geom, read_f32_le(with_suffix(stem, ".raw"), geom.size()));
}

DensityImage read_density(const std::filesystem::path& stem)
{
    const auto geom = read_image_geometry(stem);
    return DensityImage(geom, read_f32_le(with_suffix(stem, ".raw"), geom.size()));
}

void write_pgm(const std::filesystem::path& file, const GridGeometry& geom,
               std::span<const double> values)
{
    if (values.size() != geom.size())
        throw GeometryMismatch("write_pgm: value count does not match the grid");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = values.empty() ? 0.0 : *hi - *lo;
    std::ofstream out(file, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + file.string());
    out << "P5\n" << geom.nx() << ' ' << geom.ny() << "\n255\n";
    // PGM rows run top to bottom; the grid's y axis points up.
    std::vector<unsigned char> row(geom.nx());
    for (std::size_t r = 0; r < geom.ny(); ++r) {
        const std::size_t iy = geom.ny() - 1 - r;
        for (std::size_t ix = 0; ix < geom.nx(); ++ix) {
            const double v = values[geom.index(ix, iy)];
            const double s = range > 0.0 ? (v - *lo) / range : 0.0;
            row[ix] = static_cast<unsigned char>(std::clamp(std::lround(255.0 * s), 0L, 255L));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

}  // namespace mcpet
