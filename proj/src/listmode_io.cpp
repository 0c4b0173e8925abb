#include "mcpet/listmode_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>

#include "mcpet/errors.hpp"
#include "mcpet/image_io.hpp"
#include "mcpet/json_io.hpp"

namespace mcpet {

using nlohmann::json;

json projector_config_to_json(const ProjectorConfig& c)
{
    return json{{"n_angles", c.n_angles},
                {"n_tangential", c.n_tangential},
                {"fov_radius", c.fov_radius},
                {"detector_width", c.detector_width}};
}

ProjectorConfig projector_config_from_json(const json& j)
{
    try {
        ProjectorConfig c;
        c.n_angles = j.at("n_angles").get<std::size_t>();
        c.n_tangential = j.at("n_tangential").get<std::size_t>();
        c.fov_radius = j.at("fov_radius").get<double>();
        c.detector_width = j.at("detector_width").get<double>();
        return c;
    } catch (const json::exception& e) {
        throw IoError(std::string("bad projector config: ") + e.what());
    }
}

void write_listmode(const std::filesystem::path& stem, const ListModeFile& file)
{
    const auto csv = with_suffix(stem, ".csv");
    std::ofstream out(csv);
    if (!out)
        throw IoError("cannot write " + csv.string());
    out << "detector,time\n";
    char buf[64];
    for (const auto& e : file.data.events) {
        std::snprintf(buf, sizeof buf, "%u,%.17g\n", static_cast<unsigned>(e.detector), e.time);
        out << buf;
    }
    if (!out)
        throw IoError("short write to " + csv.string());
    write_json_file(with_suffix(stem, ".json"),
                    json{{"seed", file.seed},
                         {"n", file.data.n()},
                         {"model_descriptor", file.model_descriptor},
                         {"projector_config", projector_config_to_json(file.projector)}});
}

ListModeFile read_listmode(const std::filesystem::path& stem)
{
    ListModeFile f;
    const auto meta = read_json_file(with_suffix(stem, ".json"));
    std::size_t n = 0;
    try {
        f.seed = meta.at("seed").get<std::uint64_t>();
        n = meta.at("n").get<std::size_t>();
        f.model_descriptor = meta.at("model_descriptor");
        f.projector = projector_config_from_json(meta.at("projector_config"));
    } catch (const json::exception& e) {
        throw IoError("bad list-mode sidecar " + stem.string() + ": " + e.what());
    }

    const auto csv = with_suffix(stem, ".csv");
    std::ifstream in(csv);
    if (!in)
        throw IoError("cannot open " + csv.string());
    std::string line;
    if (!std::getline(in, line) || line != "detector,time")
        throw IoError(csv.string() + ": expected header 'detector,time'");
    std::vector<Event> events;
    events.reserve(n);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        Event e;
        double t = 0.0;
        const auto r1 = std::from_chars(line.data(), line.data() + comma, e.detector);
        const auto r2 = comma == std::string::npos
                            ? std::from_chars_result{nullptr, std::errc::invalid_argument}
                            : std::from_chars(line.data() + comma + 1, line.data() + line.size(), t);
        if (r1.ec != std::errc{} || r2.ec != std::errc{})
            throw IoError(csv.string() + ":" + std::to_string(lineno) + ": malformed event");
        e.time = t;
        events.push_back(e);
    }
    if (events.size() != n)
        throw IoError(csv.string() + ": sidecar says n = " + std::to_string(n) + ", file has "
                      + std::to_string(events.size()) + " events");
    f.data = ListModeData::from_events(std::move(events), f.projector.detectors());
    return f;
}

}  // namespace mcpet
