#include "mcpet/motion_io.hpp"

#include "mcpet/errors.hpp"
#include "mcpet/image_io.hpp"
#include "mcpet/json_io.hpp"

namespace mcpet {

using nlohmann::json;

void write_velocity(const std::filesystem::path& stem, const VelocityField& v)
{
    const auto& g = v.geom;
    std::vector<double> planes(v.vx);
    planes.insert(planes.end(), v.vy.begin(), v.vy.end());
    write_json_file(with_suffix(stem, ".json"),
                    json{{"nx", g.nx()},
                         {"ny", g.ny()},
                         {"extent", {g.x_min(), g.x_max(), g.y_min(), g.y_max()}},
                         {"planes", 2}});
    write_f32_le(with_suffix(stem, ".raw"), planes);
}

VelocityField read_velocity(const std::filesystem::path& stem)
{
    const auto geom = read_image_geometry(stem);
    auto planes = read_f32_le(with_suffix(stem, ".raw"), 2 * geom.size());
    std::vector<double> vy(planes.begin() + static_cast<std::ptrdiff_t>(geom.size()), planes.end());
    planes.resize(geom.size());
    return VelocityField(geom, std::move(planes), std::move(vy));
}

MotionModel motion_from_json(const json& j, const GridGeometry& geom,
                             const std::filesystem::path& base_dir)
{
    try {
        const auto type = j.at("type").get<std::string>();
        if (type == "static")
            return MotionModel::static_model();
        if (type == "translation")
            return MotionModel::translation(j.value("a", 40.0 / 3.0), j.value("b", -10.0),
                                            j.value("stop", 0.75));
        if (type == "diffeo") {
            const int steps = j.value("steps", 32);
            if (j.contains("velocity_file")) {
                std::filesystem::path file = j.at("velocity_file").get<std::string>();
                if (file.is_relative())
                    file = base_dir / file;
                auto v = read_velocity(file);
                require_same_geometry(v.geom, geom, "diffeo descriptor");
                return MotionModel::diffeo(std::move(v), steps);
            }
            const auto preset = j.value("preset", std::string("swirl"));
            if (preset != "swirl")
                throw InvalidArgument("unknown velocity preset '" + preset + "'");
            return MotionModel::diffeo(
                swirl_velocity(geom, j.value("rotation", 0.5), j.value("expansion", 0.15)), steps);
        }
        if (type == "gated") {
            std::vector<MotionModel> models;
            for (const auto& m : j.at("models"))
                models.push_back(motion_from_json(m, geom, base_dir));
            return MotionModel::piecewise(j.at("times").get<std::vector<double>>(), std::move(models));
        }
        throw InvalidArgument("unknown motion type '" + type + "'");
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("bad motion descriptor: ") + e.what());
    }
}

json motion_to_json(const MotionModel& model, const std::filesystem::path& dir, const std::string& name)
{
    return std::visit(
        [&](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StaticMotion>) {
                return json{{"type", "static"}};
            } else if constexpr (std::is_same_v<T, TranslationMotion>) {
                return json{{"type", "translation"}, {"a", m.a}, {"b", m.b}, {"stop", m.stop}};
            } else if constexpr (std::is_same_v<T, DiffeoMotion>) {
                const std::string file = name + "_velocity";
                write_velocity(dir / file, m.velocity);
                return json{{"type", "diffeo"}, {"velocity_file", file}, {"steps", m.steps}};
            } else {
                json models = json::array();
                for (std::size_t s = 0; s < m.models.size(); ++s)
                    models.push_back(motion_to_json(m.models[s], dir, name + "_gate" + std::to_string(s)));
                return json{{"type", "gated"}, {"times", m.times}, {"models", models}};
            }
        },
        model.variant());
}

}  // namespace mcpet
