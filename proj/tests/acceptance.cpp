// Acceptance runner: one pass/fail line per criterion.
//   mcpet_acceptance [--criterion N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <CLI11.hpp>

#include "mcpet/experiment.hpp"
#include "mcpet/recon.hpp"
#include "support.hpp"

using namespace mcpet;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string format(const char* fmt, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

ExperimentConfig config_for(const std::string& profile, const std::string& scenario, std::uint64_t seed = 1)
{
    auto c = profile_config(profile, scenario);
    c.seed = seed;
    return c;
}

double pixel_rel_diff(const DensityImage& a, const DensityImage& b)
{
    double worst = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) {
        const double m = std::max(std::abs(a[q]), std::abs(b[q]));
        if (m > 0.0)
            worst = std::max(worst, std::abs(a[q] - b[q]) / m);
    }
    return worst;
}

struct Built
{
    SensitivityImage f;
    KernelSet kernels;
};

Built build(const Experiment& ex, const ListModeData& data, const MotionModel& model)
{
    const auto& rc = ex.config().recon;
    auto f = sensitivity(model, ex.projector(), rc.time_samples, rc.c_floor_rel);
    auto ks = KernelSet::build(data, model, ex.projector(), f);
    return {std::move(f), std::move(ks)};
}

Outcome adjoint()
{
    const auto g = GridGeometry::square(64, 20.0);
    const auto proj = Projector::parallel_strip(ProjectorConfig::for_geometry(30, 32, g), g);
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto mu = test::random_density(rng, g);
        const Sinogram lambda(30, 32, test::random_values(rng, proj.detectors(), -1.0, 1.0));
        const auto Amu = proj.forward(mu);
        double lhs = 0.0;
        for (std::size_t i = 0; i < lambda.size(); ++i)
            lhs += Amu[i] * lambda[i];
        const double rhs = pairing(mu, proj.adjoint(lambda));
        worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + 1.0));
    }
    return {worst <= 1e-10, format("max |<A mu, l> - <mu, A* l>| / (|<A mu, l>| + 1) = %.3g", worst)};
}

Outcome static_reduction()
{
    const Experiment ex(config_for("fast", "static"));
    const auto data = ex.simulate(1);
    const auto motion = ex.reconstruct_motion(data);
    const auto classical = ex.reconstruct_classical(ex.aggregated(data));
    const double d = pixel_rel_diff(motion.mu, classical.mu);
    return {d <= 1e-12, format("n = %zu, max relative pixel difference %.3g", data.n(), d)};
}

Outcome gated_reduction()
{
    const Experiment ex(config_for("fast", "gated"));
    const auto data = ex.simulate(1);
    const auto motion = ex.reconstruct_motion(data);
    const auto gated = ex.reconstruct_gated(gate_counts(data, ex.model(), ex.projector().config()));
    const double d = pixel_rel_diff(motion.mu, gated.mu);
    return {d <= 1e-10, format("n = %zu, max relative pixel difference %.3g", data.n(), d)};
}

Outcome mass()
{
    std::string detail;
    bool pass = true;
    for (const auto* scenario : {"static", "translation", "diffeo", "gated"}) {
        const Experiment ex(config_for("fast", scenario));
        const auto data = ex.simulate(1);
        const auto b = build(ex, data, ex.model());
        RunOptions ro;
        ro.check_invariants = false;
        const auto st = mlem_run(uniform_start(b.f, b.kernels.n()), b.f, b.kernels, 10, ro);
        const double n = b.kernels.n();
        double worst = 0.0;
        for (int k = 1; k <= 10; ++k)
            worst = std::max(worst, std::abs(st.mass_history[k] - n) / n);
        pass = pass && worst <= 1e-9;
        detail += format("%s %.2g; ", scenario, worst);
    }
    return {pass, "max |<mu_k, f> - n| / n: " + detail.substr(0, detail.size() - 2)};
}

Outcome monotone()
{
    std::string detail;
    bool pass = true;
    for (const auto* scenario : {"translation", "diffeo"}) {
        const Experiment ex(config_for("paper", scenario));
        const auto data = ex.simulate(ex.config().seed);
        RunOptions ro;
        ro.check_invariants = false;
        const auto st = ex.reconstruct_motion(data, ex.model(), ro);
        const double scale = std::abs(st.loss_history.front());
        double rise = -kInfinity, gap_excess = -kInfinity, gap_min = kInfinity;
        for (int k = 0; k < st.k; ++k) {
            const double drop = st.loss_history[k] - st.loss_history[k + 1];
            rise = std::max(rise, -drop);
            gap_min = std::min(gap_min, st.gap_history[k]);
            gap_excess = std::max(gap_excess, st.gap_history[k] - drop);
        }
        pass = pass && rise <= 1e-9 * scale && gap_min >= 0.0 && gap_excess <= 1e-8 * scale;
        detail += format("%s: max rise %.2g, min gap %.2g, max gap - drop %.2g (|l0| = %.4g); ", scenario,
                         rise, gap_min, gap_excess, scale);
    }
    return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome simulator_statistics()
{
    const Experiment ex(config_for("fast", "static"));
    const auto y = ex.projector().forward(ex.phantom());
    const int runs = 200;
    std::vector<double> total(y.size(), 0.0);
    double n_sum = 0.0, n_sq = 0.0;
    for (int s = 0; s < runs; ++s) {
        const auto data = ex.simulate(static_cast<std::uint64_t>(s));
        for (std::size_t i = 0; i < y.size(); ++i)
            total[i] += static_cast<double>(data.counts[i]);
        const double n = static_cast<double>(data.n());
        n_sum += n;
        n_sq += n * n;
    }
    // Summed over runs each bin is Poisson with mean runs * y_i.
    double chi2 = 0.0;
    std::size_t dof = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double lambda = runs * y[i];
        if (lambda < 5.0)
            continue;
        chi2 += (total[i] - lambda) * (total[i] - lambda) / lambda;
        ++dof;
    }
    const double critical = boost::math::quantile(boost::math::chi_squared(static_cast<double>(dof)), 0.999);
    const double expected_n = pairing(ex.phantom(), sensitivity(MotionModel(), ex.projector()).values);
    const double mean = n_sum / runs;
    const double se = std::sqrt((n_sq / runs - mean * mean) / (runs - 1));
    const bool pass = chi2 <= critical && std::abs(mean - expected_n) <= 3.0 * se;
    return {pass, format("chi2 = %.1f on %zu bins (critical %.1f); E[n] = %.2f vs %.2f, SE %.3f", chi2, dof,
                         critical, mean, expected_n, se)};
}

Outcome gradient()
{
    const Experiment ex(config_for("fast", "translation"));
    const auto data = ex.simulate(1);
    const auto b = build(ex, data, ex.model());
    const auto& g = ex.geometry();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    auto base = uniform_start(b.f, b.kernels.n());
    std::vector<double> mu(base.values().begin(), base.values().end());
    for (std::size_t q = 0; q < mu.size(); ++q) {
        if (b.f.mask[q])
            mu[q] *= u(rng);
    }
    const DensityImage x(g, mu);
    const auto grad = loss_gradient(x, b.f, b.kernels);
    const double scale = test::max_value(mu);
    const double h = 1e-4;
    double worst = 0.0;
    for (int dir = 0; dir < 20; ++dir) {
        auto d = test::random_values(rng, mu.size(), -scale, scale);
        for (std::size_t q = 0; q < mu.size(); ++q)
            d[q] *= b.f.mask[q];
        std::vector<double> plus(mu), minus(mu);
        double an = 0.0;
        for (std::size_t q = 0; q < mu.size(); ++q) {
            plus[q] += h * d[q];
            minus[q] -= h * d[q];
            an += grad[q] * d[q];
        }
        an *= g.pixel_area();
        const double fd = (loss(DensityImage(g, plus), b.f, b.kernels) - loss(DensityImage(g, minus), b.f, b.kernels))
                          / (2.0 * h);
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
    }
    return {worst <= 1e-5, format("max relative error over 20 directions %.3g", worst)};
}

Outcome kkt()
{
    const auto proj = test::toy_projector();
    const auto f = sensitivity(MotionModel(), proj);
    const auto data = ListModeData::from_events({{0, 0.5}, {1, 0.5}}, 2);
    const auto ks = KernelSet::build(data, MotionModel(), proj, f);
    const auto mu0 = uniform_start(f, ks.n());
    const auto mu1 = mlem_step(mu0, f, ks);
    // By hand: mu0 = (2/3, 2/3), mu1 = (3/4, 1/2).
    const double step_err = std::max(std::abs(mu1[0] - 0.75), std::abs(mu1[1] - 0.5));
    const auto st = mlem_run(mu0, f, ks, 500);
    const auto r = kkt_residual(st.mu, f, ks);
    const double fmax = test::max_value(f.values.values());
    const bool pass = step_err <= 1e-12 && r.min_grad >= -1e-8 * fmax && r.supp_grad_max <= 1e-6 * fmax;
    return {pass, format("single-step error %.2g; after 500 iterations mu = (%.6f, %.3g), min_grad = %.3g, "
                         "supp_grad_max = %.3g (limits %.1g, %.1g)",
                         step_err, st.mu[0], st.mu[1], r.min_grad, r.supp_grad_max, -1e-8 * fmax, 1e-6 * fmax)};
}

Outcome ordering()
{
    std::string detail;
    bool pass = true;
    for (const auto* scenario : {"translation", "diffeo"}) {
        int good = 0;
        double ratio_worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const Experiment ex(config_for("paper", scenario, seed));
            const auto data = ex.simulate(seed);
            const double e_motion = relative_l2(ex.reconstruct_motion(data).mu, ex.truth_for("motion"));
            const double e_static = relative_l2(ex.reconstruct_classical(ex.simulate_static(seed)).mu,
                                                ex.truth_for("classical-static"));
            const double e_agg = relative_l2(ex.reconstruct_classical(ex.aggregated(data)).mu,
                                             ex.truth_for("classical-aggregated"));
            ratio_worst = std::max(ratio_worst, e_motion / e_static);
            good += (e_motion <= 1.15 * e_static && e_motion < e_agg);
        }
        pass = pass && good >= 9;
        detail += format("%s %d/10 seeds (worst motion/static ratio %.3f); ", scenario, good, ratio_worst);
    }
    return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome wrong_motion()
{
    const Experiment ex(config_for("paper", "diffeo"));
    const auto& d = std::get<DiffeoMotion>(ex.model().variant());
    const auto data = ex.simulate(ex.config().seed);
    const auto truth = ex.phantom();
    const auto reference = ex.reconstruct_motion(data);
    std::vector<double> err;
    bool exact = false;
    for (double delta : {0.0, 0.05, 0.2}) {
        const auto model = MotionModel::diffeo(perturbed_velocity(d.velocity, delta), d.steps);
        const auto st = ex.reconstruct_motion(data, model);
        if (delta == 0.0)
            exact = std::equal(st.mu.values().begin(), st.mu.values().end(), reference.mu.values().begin());
        err.push_back(relative_l2(st.mu, truth));
    }
    const bool pass = exact && err[0] <= err[1] && err[1] <= err[2];
    return {pass, format("rel L2 at delta 0, 0.05, 0.2: %.4f, %.4f, %.4f; delta 0 %s the true-model result", err[0],
                         err[1], err[2], exact ? "equals" : "differs from")};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"adjoint identity", adjoint},
        {"static reduction", static_reduction},
        {"gated reduction", gated_reduction},
        {"mass conservation", mass},
        {"monotone loss and surrogate sandwich", monotone},
        {"simulator statistics", simulator_statistics},
        {"gradient check", gradient},
        {"KKT conditions on the two-pixel toy", kkt},
        {"experiment ordering", ordering},
        {"wrong-motion degradation", wrong_motion},
    };
    if (selected.empty()) {
        for (int k = 1; k <= 10; ++k)
            selected.push_back(k);
    }

    int failed = 0;
    for (int k : selected) {
        const auto& [name, run] = criteria[static_cast<std::size_t>(k - 1)];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", k, name.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
