// Command-line front end: phantom, simulate, reconstruct, compare, wrong-motion.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcpet/errors.hpp"
#include "mcpet/experiment.hpp"
#include "mcpet/json_io.hpp"

namespace {

struct Common
{
    std::string config_file;
    std::string profile;
    std::string scenario;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config_file, "Experiment configuration (JSON)");
    cmd->add_option("--profile", c.profile, "Scale profile")->check(CLI::IsMember({"fast", "paper"}));
    cmd->add_option("--scenario", c.scenario, "Motion scenario")
        ->check(CLI::IsMember({"static", "translation", "diffeo", "gated"}));
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&c](const std::uint64_t& s) { c.seed = s; c.seed_set = true; }, "Master seed");
}

mcpet::ExperimentConfig resolve(const Common& c)
{
    nlohmann::json j = nlohmann::json::object();
    std::filesystem::path base = std::filesystem::current_path();
    if (!c.config_file.empty()) {
        j = mcpet::read_json_file(c.config_file);
        base = std::filesystem::absolute(c.config_file).parent_path();
    }
    if (!c.scenario.empty()) {
        j["scenario"] = c.scenario;
        j.erase("motion");
        j.erase("partial_window");
    }
    auto config = mcpet::experiment_config_from_json(j, base, c.profile);
    if (c.seed_set)
        config.seed = c.seed;
    if (!c.out.empty())
        config.out_dir = c.out;
    return config;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Motion-compensated list-mode PET reconstruction"};
    app.require_subcommand(1);

    Common common;
    std::string method = "motion";

    auto* phantom = app.add_subcommand("phantom", "Write the template and its motion frames");
    auto* simulate = app.add_subcommand("simulate", "Simulate list-mode and binned data");
    auto* reconstruct = app.add_subcommand("reconstruct", "Run one reconstruction method");
    auto* compare = app.add_subcommand("compare", "Error metrics of the stored reconstructions");
    auto* wrong = app.add_subcommand("wrong-motion", "Reconstruct under perturbed velocity fields");
    for (auto* cmd : {phantom, simulate, reconstruct, compare, wrong})
        add_common(cmd, common);
    reconstruct->add_option("--method", method, "Reconstruction method")
        ->check(CLI::IsMember(mcpet::reconstruction_methods()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << nlohmann::json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    try {
        const auto config = resolve(common);
        nlohmann::json result;
        if (phantom->parsed())
            result = mcpet::cmd_phantom(config);
        else if (simulate->parsed())
            result = mcpet::cmd_simulate(config);
        else if (reconstruct->parsed())
            result = mcpet::cmd_reconstruct(config, method);
        else if (compare->parsed())
            result = mcpet::cmd_compare(config);
        else
            result = mcpet::cmd_wrong_motion(config);
        std::cout << result.dump(2) << '\n';
        return 0;
    } catch (const mcpet::Error& e) {
        std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}
