#include "mcpet/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mcpet/divergence.hpp"
#include "mcpet/errors.hpp"
#include "mcpet/image_io.hpp"
#include "mcpet/json_io.hpp"
#include "mcpet/listmode_io.hpp"
#include "mcpet/motion_io.hpp"
#include "mcpet/phantom.hpp"
#include "mcpet/random.hpp"
#include "mcpet/sinogram_io.hpp"

namespace mcpet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

json scenario_motion(const std::string& scenario)
{
    if (scenario == "static")
        return json{{"type", "static"}};
    if (scenario == "translation")
        return json{{"type", "translation"}, {"a", 40.0 / 3.0}, {"b", -10.0}, {"stop", 0.75}};
    if (scenario == "diffeo")
        return json{{"type", "diffeo"}, {"preset", "swirl"}, {"rotation", 0.5},
                    {"expansion", 0.15}, {"steps", 32}};
    if (scenario == "gated") {
        auto shift = [](double b) {
            return json{{"type", "translation"}, {"a", 0.0}, {"b", b}, {"stop", 1.0}};
        };
        return json{{"type", "gated"},
                    {"times", {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}},
                    {"models", {shift(-6.0), shift(-3.0), json{{"type", "static"}}}}};
    }
    throw InvalidArgument("unknown scenario '" + scenario + "'");
}

ExperimentConfig profile_config(const std::string& profile, const std::string& scenario)
{
    ExperimentConfig c;
    c.profile = profile;
    if (profile == "paper") {
        c.grid = 128;
        c.n_angles = 45;
        c.n_tangential = 64;
    } else if (profile == "fast") {
        c.grid = 64;
        c.n_angles = 30;
        c.n_tangential = 32;
    } else {
        throw InvalidArgument("unknown profile '" + profile + "' (expected fast or paper)");
    }
    c.scenario = scenario;
    c.motion = scenario_motion(scenario);
    if (scenario == "diffeo")
        c.partial_window = {0.0, 0.25};
    else if (scenario == "gated")
        c.partial_window = {2.0 / 3.0, 1.0};
    else
        c.partial_window = {0.75, 1.0};
    return c;
}

ExperimentConfig experiment_config_from_json(const json& j, const std::filesystem::path& base_dir,
                                             const std::string& profile_override)
{
    try {
        const std::string profile = !profile_override.empty() ? profile_override
                                                              : j.value("profile", std::string("fast"));
        ExperimentConfig c = profile_config(profile, j.value("scenario", std::string("translation")));
        c.base_dir = base_dir;
        c.grid = j.value("grid", c.grid);
        c.half_side = j.value("half_side", c.half_side);
        c.n_angles = j.value("n_angles", c.n_angles);
        c.n_tangential = j.value("n_tangential", c.n_tangential);
        if (j.contains("motion"))
            c.motion = j.at("motion");
        c.dose = j.value("dose", c.dose);
        c.seed = j.value("seed", c.seed);
        if (j.contains("recon"))
            c.recon = recon_config_from_json(j.at("recon"));
        c.recon.iterations = j.value("iterations", c.recon.iterations);
        if (j.contains("partial_window")) {
            const auto w = j.at("partial_window").get<std::vector<double>>();
            if (w.size() != 2)
                throw InvalidArgument("partial_window must have two entries");
            c.partial_window = {w[0], w[1]};
        }
        c.deltas = j.value("deltas", c.deltas);
        if (j.contains("out")) {
            std::filesystem::path out = j.at("out").get<std::string>();
            c.out_dir = out.is_relative() ? base_dir / out : out;
        }
        if (c.recon.iterations < 1)
            throw InvalidArgument("iterations must be >= 1");
        if (!(c.dose > 0.0))
            throw InvalidArgument("dose must be > 0");
        return c;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("bad experiment config: ") + e.what());
    }
}

json experiment_config_to_json(const ExperimentConfig& c)
{
    return json{{"profile", c.profile},
                {"scenario", c.scenario},
                {"grid", c.grid},
                {"half_side", c.half_side},
                {"n_angles", c.n_angles},
                {"n_tangential", c.n_tangential},
                {"motion", c.motion},
                {"dose", c.dose},
                {"seed", c.seed},
                {"recon", recon_config_to_json(c.recon)},
                {"partial_window", c.partial_window},
                {"deltas", c.deltas},
                {"out", c.out_dir.string()}};
}

std::uint64_t static_seed(std::uint64_t seed)
{
    return mix64(seed ^ 0x5354415449430000ull);
}

// ---------------------------------------------------------------------------
// Experiment

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)),
      geom_(GridGeometry::square(config_.grid, config_.half_side)),
      proj_(Projector::parallel_strip(
          ProjectorConfig::for_geometry(config_.n_angles, config_.n_tangential, geom_), geom_)),
      model_(motion_from_json(config_.motion.is_null() ? scenario_motion(config_.scenario)
                                                       : config_.motion,
                              geom_, config_.base_dir)),
      phantom_(make_derenzo(geom_, config_.dose))
{
    const auto [w0, w1] = config_.partial_window;
    if (!(w0 >= 0.0 && w0 < w1 && w1 <= 1.0))
        throw InvalidArgument("partial_window must satisfy 0 <= t1 < t2 <= 1");
}

ListModeData Experiment::simulate(std::uint64_t seed) const
{
    return simulate_listmode(phantom_, model_, proj_, seed);
}

Sinogram Experiment::simulate_static(std::uint64_t seed) const
{
    // A static acquisition already is the static benchmark's data.
    if (std::holds_alternative<StaticMotion>(model_.variant()))
        return aggregated(simulate(seed));
    const auto data = simulate_listmode(phantom_, MotionModel::static_model(), proj_, static_seed(seed));
    return aggregate(data, proj_.config(), 0.0, 1.0);
}

Sinogram Experiment::aggregated(const ListModeData& data) const
{
    return aggregate(data, proj_.config(), 0.0, 1.0);
}

Sinogram Experiment::partial(const ListModeData& data) const
{
    return aggregate(data, proj_.config(), config_.partial_window[0], config_.partial_window[1]);
}

double Experiment::partial_scale() const
{
    return 1.0 / (config_.partial_window[1] - config_.partial_window[0]);
}

DensityImage Experiment::initial_image(const SensitivityImage& f, double n) const
{
    if (config_.recon.mu0 == "uniform")
        return uniform_start(f, n);
    std::filesystem::path stem = config_.recon.mu0;
    if (stem.is_relative())
        stem = config_.base_dir / stem;
    auto mu0 = read_density(stem);
    require_same_geometry(mu0.geometry(), geom_, "initial image");
    return mu0;
}

ReconState Experiment::reconstruct_motion(const ListModeData& data) const
{
    return reconstruct_motion(data, model_);
}

ReconState Experiment::reconstruct_motion(const ListModeData& data, const MotionModel& model,
                                          const RunOptions& options) const
{
    const auto& rc = config_.recon;
    const SensitivityImage f = sensitivity(model, proj_, rc.time_samples, rc.c_floor_rel);
    KernelOptions ko;
    ko.memory_budget_bytes = rc.memory_budget_bytes;
    const KernelSet kernels = KernelSet::build(data, model, proj_, f, ko);
    return mlem_run(initial_image(f, kernels.n()), f, kernels, rc.iterations, options);
}

ReconState Experiment::reconstruct_classical(const Sinogram& y) const
{
    const auto& rc = config_.recon;
    const SensitivityImage f = make_sensitivity(proj_.adjoint_ones(), rc.c_floor_rel);
    const double n = std::accumulate(y.values().begin(), y.values().end(), 0.0);
    return classical_mlem_run(initial_image(f, n), y, proj_, rc.iterations, rc.c_floor_rel);
}

ReconState Experiment::reconstruct_gated(const std::vector<Sinogram>& gated_counts) const
{
    const auto& rc = config_.recon;
    const SensitivityImage f = sensitivity(model_, proj_, rc.time_samples, rc.c_floor_rel);
    double n = 0.0;
    for (const auto& y : gated_counts)
        n = std::accumulate(y.values().begin(), y.values().end(), n);
    return gated_mlem_run(initial_image(f, n), gated_counts, model_, proj_, rc.iterations,
                          rc.c_floor_rel);
}

DensityImage Experiment::truth(double t) const
{
    return push_forward(model_, t, phantom_);
}

double Experiment::truth_time(const std::string& method) const
{
    if (method == "motion" || method == "classical-static" || method == "gated")
        return -1.0;
    if (method == "classical-aggregated")
        return 1.0;
    if (method == "classical-partial")
        return config_.partial_window[1];
    throw InvalidArgument("unknown method '" + method + "'");
}

DensityImage Experiment::truth_for(const std::string& method) const
{
    const double t = truth_time(method);
    return t < 0.0 ? phantom_ : truth(t);
}

// ---------------------------------------------------------------------------
// Metrics

double relative_l2(const DensityImage& x, const DensityImage& truth)
{
    require_same_geometry(x.geometry(), truth.geometry(), "relative_l2");
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < x.size(); ++p) {
        const double d = x[p] - truth[p];
        num += d * d;
        den += truth[p] * truth[p];
    }
    if (den == 0.0)
        return num == 0.0 ? 0.0 : kInfinity;
    return std::sqrt(num / den);
}

ImageMetrics compare_images(const DensityImage& x, const DensityImage& truth)
{
    return {relative_l2(x, truth), kl_images(truth, x)};
}

VelocityField perturbed_velocity(const VelocityField& v, double delta_rel)
{
    if (delta_rel == 0.0)
        return v;
    return v.plus(drift_perturbation(v.geom), delta_rel * v.sup_norm());
}

// ---------------------------------------------------------------------------
// Commands

namespace {

namespace fs = std::filesystem;

void write_image_set(const fs::path& stem, const DensityImage& img)
{
    write_image(stem, img);
    write_pgm(with_suffix(stem, ".pgm"), img.geometry(), img.values());
}

fs::path ensure_out(const ExperimentConfig& c)
{
    fs::create_directories(c.out_dir);
    return c.out_dir;
}

void require_file(const fs::path& file, const char* hint)
{
    if (!fs::exists(file))
        throw IoError(file.string() + " not found; run `" + hint + "` first");
}

std::string fixed(double v, int digits)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

json state_summary(const ReconState& st)
{
    return json{{"iterations", st.k},
                {"loss_first", st.loss_history.front()},
                {"loss_last", st.loss_history.back()},
                {"mass_last", st.mass_history.back()}};
}

}  // namespace

json cmd_phantom(const ExperimentConfig& config)
{
    const Experiment ex(config);
    const auto out = ensure_out(config);
    write_image_set(out / "mu_r", ex.phantom());
    write_json_file(out / "motion.json", motion_to_json(ex.model(), out, "motion"));
    json frames = json::array();
    for (int k = 0; k <= 5; ++k) {
        const double t = 0.2 * k;
        const DensityImage frame = push_forward(ex.model(), t, ex.phantom());
        const std::string name = "frame_t" + fixed(t, 1);
        write_image_set(out / name, frame);
        frames.push_back({{"t", t}, {"file", name}, {"mass", total_mass(frame)}});
    }
    return json{{"command", "phantom"},
                {"mass", total_mass(ex.phantom())},
                {"frames", frames},
                {"out", out.string()}};
}

json cmd_simulate(const ExperimentConfig& config)
{
    const Experiment ex(config);
    const auto out = ensure_out(config);
    const ListModeData data = ex.simulate(config.seed);
    const json descriptor = motion_to_json(ex.model(), out, "motion");
    write_json_file(out / "motion.json", descriptor);
    write_listmode(out / "listmode", {data, config.seed, descriptor, ex.projector().config()});
    write_sinogram(out / "aggregated", ex.aggregated(data));
    write_sinogram(out / "partial", ex.partial(data));
    const Sinogram stat = ex.simulate_static(config.seed);
    write_sinogram(out / "static_counts", stat);
    json gates = json::array();
    if (ex.model().is_piecewise_invariant()) {
        const auto g = gate_counts(data, ex.model(), ex.projector().config());
        for (std::size_t s = 0; s < g.size(); ++s) {
            write_sinogram(out / ("gate" + std::to_string(s)), g[s]);
            gates.push_back("gate" + std::to_string(s));
        }
    }
    return json{{"command", "simulate"},
                {"seed", config.seed},
                {"n", data.n()},
                {"n_static", std::accumulate(stat.values().begin(), stat.values().end(), 0.0)},
                {"gates", gates},
                {"out", out.string()}};
}

json cmd_reconstruct(const ExperimentConfig& config, const std::string& method)
{
    const Experiment ex(config);
    const auto out = ensure_out(config);
    ReconState st{DensityImage(ex.geometry()), 0, {}, {}, {}, {}};
    double scale = 1.0;
    if (method == "motion") {
        require_file(out / "listmode.csv", "mcpet simulate");
        const auto lm = read_listmode(out / "listmode");
        if (!(lm.projector == ex.projector().config()))
            throw GeometryMismatch("list-mode file was recorded with a different projector");
        st = ex.reconstruct_motion(lm.data);
    } else if (method == "classical-static") {
        require_file(out / "static_counts.json", "mcpet simulate");
        st = ex.reconstruct_classical(read_sinogram(out / "static_counts"));
    } else if (method == "classical-aggregated") {
        require_file(out / "aggregated.json", "mcpet simulate");
        st = ex.reconstruct_classical(read_sinogram(out / "aggregated"));
    } else if (method == "classical-partial") {
        require_file(out / "partial.json", "mcpet simulate");
        st = ex.reconstruct_classical(read_sinogram(out / "partial"));
        scale = ex.partial_scale();
    } else if (method == "gated") {
        if (!ex.model().is_piecewise_invariant())
            throw InvalidArgument("method gated needs a gated motion model with time-invariant gates");
        std::vector<Sinogram> counts;
        const auto& pw = std::get<PiecewiseMotion>(ex.model().variant());
        for (std::size_t s = 0; s < pw.models.size(); ++s) {
            const auto stem = out / ("gate" + std::to_string(s));
            require_file(with_suffix(stem, ".json"), "mcpet simulate");
            counts.push_back(read_sinogram(stem));
        }
        st = ex.reconstruct_gated(counts);
    } else {
        throw InvalidArgument("unknown method '" + method + "'");
    }

    std::vector<double> v(st.mu.values().begin(), st.mu.values().end());
    for (auto& x : v)
        x *= scale;
    const DensityImage img(ex.geometry(), std::move(v));
    write_image_set(out / ("recon_" + method), img);
    write_diagnostics_csv(out / ("diagnostics_" + method + ".csv"), st);
    auto summary = state_summary(st);
    summary["command"] = "reconstruct";
    summary["method"] = method;
    summary["scale"] = scale;
    return summary;
}

json cmd_compare(const ExperimentConfig& config)
{
    const Experiment ex(config);
    const auto out = ensure_out(config);
    json rows = json::array();
    std::ofstream csv(out / "metrics.csv");
    if (!csv)
        throw IoError("cannot write " + (out / "metrics.csv").string());
    csv << "method,truth,rel_l2,kl\n";
    for (const auto& method : reconstruction_methods()) {
        const auto stem = out / ("recon_" + method);
        if (!fs::exists(with_suffix(stem, ".json")))
            continue;
        const DensityImage img = read_density(stem);
        const double t = ex.truth_time(method);
        const auto m = compare_images(img, ex.truth_for(method));
        const std::string truth = t < 0.0 ? "template" : "t=" + fixed(t, 4);
        rows.push_back({{"method", method}, {"truth", truth}, {"rel_l2", m.rel_l2},
                        {"kl", std::isfinite(m.kl) ? json(m.kl) : json("inf")}});
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g\n", method.c_str(), truth.c_str(), m.rel_l2, m.kl);
        csv << buf;
    }
    if (rows.empty())
        throw IoError("no reconstructions found in " + out.string() + "; run `mcpet reconstruct` first");
    return json{{"command", "compare"}, {"metrics", rows}};
}

json cmd_wrong_motion(const ExperimentConfig& config)
{
    const Experiment ex(config);
    const auto* d = std::get_if<DiffeoMotion>(&ex.model().variant());
    if (!d)
        throw InvalidArgument("wrong-motion needs a diffeomorphic motion model");
    const auto out = ensure_out(config);
    require_file(out / "listmode.csv", "mcpet simulate");
    const auto lm = read_listmode(out / "listmode");
    const DensityImage truth = ex.phantom();

    std::ofstream csv(out / "wrong_motion.csv");
    if (!csv)
        throw IoError("cannot write " + (out / "wrong_motion.csv").string());
    csv << "delta,rel_l2,kl\n";
    json rows = json::array();
    for (const double delta : config.deltas) {
        const MotionModel wrong = delta == 0.0 ? ex.model()
                                               : MotionModel::diffeo(perturbed_velocity(d->velocity, delta),
                                                                     d->steps);
        const ReconState st = ex.reconstruct_motion(lm.data, wrong);
        const auto m = compare_images(st.mu, truth);
        write_image_set(out / ("wrong_delta" + fixed(delta, 2)), st.mu);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.4g,%.10g,%.10g\n", delta, m.rel_l2, m.kl);
        csv << buf;
        rows.push_back({{"delta", delta}, {"rel_l2", m.rel_l2}, {"kl", m.kl}});
    }
    return json{{"command", "wrong-motion"}, {"results", rows}};
}

}  // namespace mcpet
