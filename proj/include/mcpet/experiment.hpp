#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcpet/image.hpp"
#include "mcpet/motion.hpp"
#include "mcpet/projector.hpp"
#include "mcpet/recon.hpp"
#include "mcpet/recon_io.hpp"
#include "mcpet/simulate.hpp"

namespace mcpet {

/*!
 * One reconstruction experiment. Profiles: "paper" (128 x 128 grid, 45
 * views x 64 bins) and "fast" (64 x 64, 30 x 32). Scenarios: "static",
 * "translation", "diffeo" and "gated", each with a default motion
 * descriptor and partial-data window.
 */
struct ExperimentConfig
{
    std::string profile = "fast";
    std::string scenario = "translation";
    std::size_t grid = 64;
    double half_side = 20.0;
    std::size_t n_angles = 30;
    std::size_t n_tangential = 32;
    //! Motion descriptor; null selects the scenario default.
    nlohmann::json motion;
    double dose = 10.0;
    std::uint64_t seed = 1;
    ReconConfig recon;
    std::array<double, 2> partial_window{0.75, 1.0};
    //! Wrong-motion perturbations, relative to the sup norm of the true field.
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.2};
    std::filesystem::path out_dir = "out";
    //! Directory against which relative paths in the config resolve.
    std::filesystem::path base_dir;
};

ExperimentConfig profile_config(const std::string& profile, const std::string& scenario = "translation");

//! Applies the keys present in `j` on top of the profile/scenario it names.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir,
                                             const std::string& profile_override = "");
nlohmann::json experiment_config_to_json(const ExperimentConfig& c);

nlohmann::json scenario_motion(const std::string& scenario);

//! Seed of the static-model data used by the classical-static benchmark.
std::uint64_t static_seed(std::uint64_t seed);

class Experiment
{
  public:
    explicit Experiment(ExperimentConfig config);

    const ExperimentConfig& config() const { return config_; }
    const GridGeometry& geometry() const { return geom_; }
    const Projector& projector() const { return proj_; }
    const MotionModel& model() const { return model_; }
    const DensityImage& phantom() const { return phantom_; }

    ListModeData simulate(std::uint64_t seed) const;
    //! Counts of a static-model acquisition: seed static_seed(seed), or the
    //! motion data itself when the model is static.
    Sinogram simulate_static(std::uint64_t seed) const;

    Sinogram aggregated(const ListModeData& data) const;
    Sinogram partial(const ListModeData& data) const;
    double partial_scale() const;

    ReconState reconstruct_motion(const ListModeData& data) const;
    ReconState reconstruct_motion(const ListModeData& data, const MotionModel& model,
                                  const RunOptions& options = {}) const;
    //! Classical ML-EM on binned counts; the image is not rescaled.
    ReconState reconstruct_classical(const Sinogram& y) const;
    ReconState reconstruct_gated(const std::vector<Sinogram>& gated_counts) const;

    //! The template transported to time t.
    DensityImage truth(double t) const;
    /*!
     * Ground truth of a method: the template itself for methods estimating
     * it (motion, gated, classical-static), otherwise the template transported
     * to the end of the data window.
     */
    DensityImage truth_for(const std::string& method) const;
    //! End of the data window, or a negative value when the truth is the template.
    double truth_time(const std::string& method) const;

  private:
    DensityImage initial_image(const SensitivityImage& f, double n) const;

    ExperimentConfig config_;
    GridGeometry geom_;
    Projector proj_;
    MotionModel model_;
    DensityImage phantom_;
};

struct ImageMetrics
{
    double rel_l2 = 0.0;
    double kl = 0.0;
};

//! ||x - truth||_2 / ||truth||_2 over pixels.
double relative_l2(const DensityImage& x, const DensityImage& truth);
//! rel_l2 and kl_images(truth, x).
ImageMetrics compare_images(const DensityImage& x, const DensityImage& truth);

//! v + delta_rel ||v||_inf p with p the unit drift field.
VelocityField perturbed_velocity(const VelocityField& v, double delta_rel);

inline const std::vector<std::string>& reconstruction_methods()
{
    static const std::vector<std::string> m{"motion", "classical-static", "classical-aggregated",
                                            "classical-partial", "gated"};
    return m;
}

// Command pipelines. Each reads and writes files under config.out_dir and
// returns a JSON summary.
nlohmann::json cmd_phantom(const ExperimentConfig& config);
nlohmann::json cmd_simulate(const ExperimentConfig& config);
nlohmann::json cmd_reconstruct(const ExperimentConfig& config, const std::string& method);
nlohmann::json cmd_compare(const ExperimentConfig& config);
nlohmann::json cmd_wrong_motion(const ExperimentConfig& config);

}  // namespace mcpet
