#include "mcpet/sinogram_io.hpp"

#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "mcpet/errors.hpp"
#include "mcpet/image_io.hpp"

namespace mcpet {

void write_sinogram(const std::filesystem::path& stem, const Sinogram& s)
{
    const nlohmann::json meta{{"n_angles", s.n_angles()}, {"n_tangential", s.n_tangential()}};
    std::ofstream out(with_suffix(stem, ".json"));
    if (!out)
        throw IoError("cannot write " + with_suffix(stem, ".json").string());
    out << meta.dump(2) << '\n';
    write_f32_le(with_suffix(stem, ".raw"), s.values());
}

Sinogram read_sinogram(const std::filesystem::path& stem)
{
    std::ifstream in(with_suffix(stem, ".json"));
    if (!in)
        throw IoError("cannot open " + with_suffix(stem, ".json").string());
    try {
        const auto meta = nlohmann::json::parse(in);
        const auto na = meta.at("n_angles").get<std::size_t>();
        const auto nt = meta.at("n_tangential").get<std::size_t>();
        return Sinogram(na, nt, read_f32_le(with_suffix(stem, ".raw"), na * nt));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad sinogram header " + stem.string() + ": " + e.what());
    }
}

void write_sinogram_csv(const std::filesystem::path& file, const Sinogram& s)
{
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write " + file.string());
    out << "angle,tangential,value\n" << std::setprecision(17);
    for (std::size_t a = 0; a < s.n_angles(); ++a)
        for (std::size_t j = 0; j < s.n_tangential(); ++j)
            out << a << ',' << j << ',' << s[a * s.n_tangential() + j] << '\n';
}

}  // namespace mcpet
