#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mcpet/recon.hpp"

namespace mcpet {

//! {"iterations", "time_samples", "c_floor_rel", "memory_budget_bytes", "mu0"}.
struct ReconConfig
{
    int iterations = 10;
    int time_samples = 64;
    double c_floor_rel = 1e-6;
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    //! "uniform", or the stem of an image file.
    std::string mu0 = "uniform";
};

ReconConfig recon_config_from_json(const nlohmann::json& j);
nlohmann::json recon_config_to_json(const ReconConfig& c);

//! CSV `k,loss,mass,surrogate_gap,min_grad,supp_grad_max`; the last row has no gap.
void write_diagnostics_csv(const std::filesystem::path& file, const ReconState& state);

}  // namespace mcpet
