#include "mcpet/recon_io.hpp"

#include <cstdio>
#include <fstream>

#include "mcpet/errors.hpp"

namespace mcpet {

using nlohmann::json;

ReconConfig recon_config_from_json(const json& j)
{
    ReconConfig c;
    try {
        c.iterations = j.value("iterations", c.iterations);
        c.time_samples = j.value("time_samples", c.time_samples);
        c.c_floor_rel = j.value("c_floor_rel", c.c_floor_rel);
        c.memory_budget_bytes = j.value("memory_budget_bytes", c.memory_budget_bytes);
        c.mu0 = j.value("mu0", c.mu0);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("bad reconstruction config: ") + e.what());
    }
    if (c.iterations < 1 || c.time_samples < 1)
        throw InvalidArgument("reconstruction config: iterations and time_samples must be >= 1");
    return c;
}

json recon_config_to_json(const ReconConfig& c)
{
    return json{{"iterations", c.iterations},
                {"time_samples", c.time_samples},
                {"c_floor_rel", c.c_floor_rel},
                {"memory_budget_bytes", c.memory_budget_bytes},
                {"mu0", c.mu0}};
}

void write_diagnostics_csv(const std::filesystem::path& file, const ReconState& state)
{
    std::ofstream out(file);
    if (!out)
        throw IoError("cannot write " + file.string());
    out << "k,loss,mass,surrogate_gap,min_grad,supp_grad_max\n";
    char buf[256];
    for (std::size_t k = 0; k < state.loss_history.size(); ++k) {
        char gap[40] = "";
        if (k < state.gap_history.size())
            std::snprintf(gap, sizeof gap, "%.17g", state.gap_history[k]);
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%s,%.17g,%.17g\n", k, state.loss_history[k],
                      state.mass_history[k], gap, state.kkt_history[k].min_grad,
                      state.kkt_history[k].supp_grad_max);
        out << buf;
    }
    if (!out)
        throw IoError("short write to " + file.string());
}

}  // namespace mcpet
