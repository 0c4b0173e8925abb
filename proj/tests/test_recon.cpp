#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <variant>
#include <vector>

#include <doctest.h>

#include "mcpet/errors.hpp"
#include "mcpet/motion.hpp"
#include "mcpet/phantom.hpp"
#include "mcpet/recon.hpp"
#include "mcpet/simulate.hpp"
#include "support.hpp"

using namespace mcpet;

namespace {

struct Problem
{
    GridGeometry geom;
    ProjectorConfig config;
    Projector proj;
    DensityImage mu_r;

    explicit Problem(std::size_t n = 32, std::size_t views = 12, std::size_t bins = 16)
        : geom(GridGeometry::square(n, 20.0)),
          config(ProjectorConfig::for_geometry(views, bins, geom)),
          proj(Projector::parallel_strip(config, geom)),
          mu_r(make_derenzo(geom, 4.0))
    {
    }
};

KernelOptions quiet()
{
    KernelOptions o;
    o.warn = false;
    return o;
}

// One event in each detector of the toy problem, at the given time.
ListModeData toy_events(std::vector<std::size_t> per_detector)
{
    std::vector<Event> ev;
    for (std::uint32_t i = 0; i < per_detector.size(); ++i) {
        for (std::size_t k = 0; k < per_detector[i]; ++k)
            ev.push_back({i, 0.5});
    }
    return ListModeData::from_events(std::move(ev), per_detector.size());
}

std::vector<double> values_of(const DensityImage& mu) { return {mu.values().begin(), mu.values().end()}; }

}  // namespace

TEST_CASE("sensitivity")
{
    const Problem p;
    const auto a1 = p.proj.adjoint_ones();

    SUBCASE("static and single-gate static give A*1")
    {
        const auto f = sensitivity(MotionModel(), p.proj);
        CHECK(test::max_abs_diff(f.values.values(), a1.values()) == 0.0);
        const auto gated = sensitivity(MotionModel::piecewise({0.0, 1.0}, {MotionModel()}), p.proj);
        CHECK(test::max_abs_diff(gated.values.values(), a1.values()) == 0.0);
        CHECK(f.c_floor == doctest::Approx(1e-6 * test::max_value(a1.values())));
        for (std::size_t q = 0; q < f.mask.size(); ++q)
            CHECK(f.mask[q] == (a1[q] >= f.c_floor));
    }

    SUBCASE("translation never exceeds the peak of A*1")
    {
        const auto f = sensitivity(MotionModel::translation(40.0 / 3.0, -10.0, 0.75), p.proj);
        const double peak = test::max_value(a1.values());
        for (std::size_t q = 0; q < f.values.size(); ++q) {
            CHECK(f.values[q] <= peak * (1.0 + 1e-12));
            if (a1[q] >= peak * (1.0 - 1e-12))
                CHECK(f.values[q] <= a1[q] + 1e-12 * peak);
        }
    }

    SUBCASE("gate weights are exact")
    {
        const auto left = MotionModel::translation(0.0, -4.0, 1.0);
        const auto model = MotionModel::piecewise({0.0, 0.25, 1.0}, {left, MotionModel()});
        const auto f = sensitivity(model, p.proj);
        const auto shifted = adjoint_apply(left, 0.0, a1);
        for (std::size_t q = 0; q < a1.size(); ++q)
            CHECK(f.values[q] == doctest::Approx(0.25 * shifted[q] + 0.75 * a1[q]).epsilon(1e-14));
    }

    SUBCASE("degenerate inputs")
    {
        CHECK_THROWS_AS(make_sensitivity(GridFunction(p.geom, 0.0)), InvariantViolation);
        CHECK_THROWS_AS(make_sensitivity(GridFunction(p.geom, -1.0)), InvalidArgument);
        CHECK_THROWS_AS(sensitivity(MotionModel(), p.proj, 0), InvalidArgument);
    }
}

TEST_CASE("event kernels")
{
    const Problem p;
    const auto data = simulate_listmode(p.mu_r, MotionModel(), p.proj, 2);

    SUBCASE("static kernels are the detector profiles")
    {
        const auto f = sensitivity(MotionModel(), p.proj);
        const auto ks = KernelSet::build(data, MotionModel(), p.proj, f, quiet());
        CHECK(ks.n() == static_cast<double>(data.n()));
        std::size_t nonzero = 0;
        for (auto c : data.counts)
            nonzero += c > 0;
        CHECK(ks.size() == nonzero);
        std::size_t k = 0;
        for (std::size_t i = 0; i < data.counts.size(); ++i) {
            if (data.counts[i] == 0)
                continue;
            SparseFunction scratch;
            const auto& g = ks.kernel(k, scratch);
            CHECK(g.index == p.proj.profile(i).index);
            CHECK(g.value == p.proj.profile(i).value);
            CHECK(ks.multiplicity(k) == static_cast<double>(data.counts[i]));
            ++k;
        }
    }

    SUBCASE("gated events share kernels")
    {
        const auto model = MotionModel::piecewise(
            {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0},
            {MotionModel::translation(0.0, -6.0, 1.0), MotionModel::translation(0.0, -3.0, 1.0),
             MotionModel()});
        const auto d = simulate_listmode(p.mu_r, model, p.proj, 5);
        const auto f = sensitivity(model, p.proj);
        const auto ks = KernelSet::build(d, model, p.proj, f, quiet());
        const auto& pw = std::get<PiecewiseMotion>(model.variant());
        std::set<std::pair<std::uint32_t, std::size_t>> groups;
        for (const auto& e : d.events)
            groups.insert({e.detector, pw.gate(e.time)});
        CHECK(ks.size() + ks.dropped() >= groups.size());
        CHECK(ks.size() <= groups.size());
        CHECK(ks.n() + static_cast<double>(ks.dropped()) >= static_cast<double>(d.n()));
    }

    SUBCASE("kernels are nonnegative and live on the mask")
    {
        const auto model = MotionModel::diffeo(swirl_velocity(p.geom, 0.5, 0.15));
        const auto d = simulate_listmode(p.mu_r, model, p.proj, 6);
        const auto f = sensitivity(model, p.proj);
        const auto ks = KernelSet::build(d, model, p.proj, f, quiet());
        CHECK(ks.size() == d.n() - ks.dropped());
        ks.for_each([&](std::size_t, const SparseFunction& g, double m) {
            CHECK(m == 1.0);
            CHECK(!g.empty());
            for (std::size_t e = 0; e < g.nnz(); ++e) {
                CHECK(g.value[e] > 0.0);
                CHECK(f.mask[g.index[e]] == 1);
            }
        });
    }

    SUBCASE("recompute mode reproduces stored kernels")
    {
        const auto model = MotionModel::translation(40.0 / 3.0, -10.0, 0.75);
        const auto d = simulate_listmode(p.mu_r, model, p.proj, 7);
        const auto f = sensitivity(model, p.proj);
        const auto stored = KernelSet::build(d, model, p.proj, f, quiet());
        auto tight = quiet();
        tight.memory_budget_bytes = 1;
        const auto lazy = KernelSet::build(d, model, p.proj, f, tight);
        CHECK(stored.stored());
        CHECK(!lazy.stored());
        CHECK(lazy.stored_bytes() == 0);
        REQUIRE(lazy.size() == stored.size());
        SparseFunction s1, s2;
        for (std::size_t k = 0; k < stored.size(); ++k) {
            CHECK(stored.kernel(k, s1).value == lazy.kernel(k, s2).value);
            CHECK(stored.multiplicity(k) == lazy.multiplicity(k));
        }
        const auto mu0 = uniform_start(f, stored.n());
        const auto a = mlem_run(mu0, f, stored, 3);
        const auto b = mlem_run(mu0, f, lazy, 3);
        CHECK(values_of(a.mu) == values_of(b.mu));
    }

    SUBCASE("kernels that vanish on the grid are dropped")
    {
        // At t = 0 the object sits 50 units to the left, off the grid.
        const auto model = MotionModel::translation(100.0, -50.0, 1.0);
        const auto f = sensitivity(model, p.proj);
        const auto d = ListModeData::from_events({{100, 0.0}, {100, 0.5}, {150, 0.5}}, p.proj.detectors());
        const auto ks = KernelSet::build(d, model, p.proj, f, quiet());
        CHECK(ks.dropped() == 1);
        CHECK(ks.n() == 2.0);
        CHECK(ks.size() == 2);
    }

    SUBCASE("explicit kernel validation")
    {
        const auto g = test::toy_geometry();
        CHECK_THROWS_AS(KernelSet(g, {SparseFunction{{1, 0}, {1.0, 1.0}}}), InvalidArgument);
        CHECK_THROWS_AS(KernelSet(g, {SparseFunction{{0}, {-1.0}}}), InvalidArgument);
        CHECK_THROWS_AS(KernelSet(g, {SparseFunction{{0}, {1.0}}}, {0.0}), InvalidArgument);
        CHECK_THROWS_AS(KernelSet(g, {SparseFunction{{5}, {1.0}}}), InvalidArgument);
    }
}

TEST_CASE("loss and gradient")
{
    const Problem p;
    const auto model = MotionModel::translation(40.0 / 3.0, -10.0, 0.75);
    const auto d = simulate_listmode(p.mu_r, model, p.proj, 3);
    const auto f = sensitivity(model, p.proj);
    const auto ks = KernelSet::build(d, model, p.proj, f, quiet());
    const KernelSet none(p.geom, {});
    std::mt19937_64 rng(31);

    SUBCASE("special values")
    {
        CHECK(loss(DensityImage(p.geom, 0.0), f, ks) == kInfinity);
        const auto mu = test::random_density(rng, p.geom);
        CHECK(loss(mu, f, none) == doctest::Approx(pairing(mu, f.values)).epsilon(1e-14));
        const auto grad = loss_gradient(mu, f, none);
        CHECK(test::max_abs_diff(grad.values(), f.values.values()) == 0.0);
        CHECK_THROWS_AS(loss_gradient(DensityImage(p.geom, 0.0), f, ks), DomainViolation);
        CHECK_THROWS_AS(mlem_step(DensityImage(p.geom, 0.0), f, ks), DomainViolation);
    }

    SUBCASE("static loss equals the binned form")
    {
        const auto ds = simulate_listmode(p.mu_r, MotionModel(), p.proj, 4);
        const auto fs = sensitivity(MotionModel(), p.proj);
        const auto kss = KernelSet::build(ds, MotionModel(), p.proj, fs, quiet());
        const auto mu = uniform_start(fs, kss.n());
        const auto Amu = p.proj.forward(mu);
        double binned = pairing(mu, p.proj.adjoint_ones());
        for (std::size_t i = 0; i < ds.counts.size(); ++i) {
            if (ds.counts[i] > 0)
                binned -= static_cast<double>(ds.counts[i]) * std::log(Amu[i]);
        }
        CHECK(std::abs(loss(mu, fs, kss) - binned) <= 1e-12 * std::abs(binned));
    }

    SUBCASE("gradient matches central differences")
    {
        std::vector<double> base(p.geom.size());
        for (std::size_t q = 0; q < base.size(); ++q)
            base[q] = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const DensityImage mu(p.geom, base);
        const auto grad = loss_gradient(mu, f, ks);
        const double h = 1e-5;
        for (int dir = 0; dir < 20; ++dir) {
            const auto dvec = test::random_values(rng, p.geom.size(), -1.0, 1.0);
            std::vector<double> plus(base), minus(base);
            for (std::size_t q = 0; q < base.size(); ++q) {
                plus[q] += h * dvec[q];
                minus[q] -= h * dvec[q];
            }
            const double fd = (loss(DensityImage(p.geom, plus), f, ks)
                               - loss(DensityImage(p.geom, minus), f, ks)) / (2.0 * h);
            double an = 0.0;
            for (std::size_t q = 0; q < base.size(); ++q)
                an += grad[q] * dvec[q];
            an *= p.geom.pixel_area();
            CHECK(std::abs(fd - an) <= 1e-5 * std::abs(an));
        }
    }
}

TEST_CASE("ML-EM on the two-pixel toy")
{
    const auto g = test::toy_geometry();
    const auto proj = test::toy_projector();
    const auto f = sensitivity(MotionModel(), proj);
    CHECK(f.values[0] == 2.0);
    CHECK(f.values[1] == 1.0);

    SUBCASE("one step from the uniform start")
    {
        const auto ks = KernelSet::build(toy_events({1, 1}), MotionModel(), proj, f, quiet());
        const auto mu0 = uniform_start(f, ks.n());
        CHECK(mu0[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(mu0[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        // <mu0, a1> = 2/3 and <mu0, a2> = 4/3, so
        // mu1 = mu0 / f * (a1 / (2/3) + a2 / (4/3)) = (3/4, 1/2).
        const auto mu1 = mlem_step(mu0, f, ks);
        CHECK(std::abs(mu1[0] - 0.75) <= 1e-12);
        CHECK(std::abs(mu1[1] - 0.5) <= 1e-12);
        const auto c1 = classical_mlem_step(mu0, Sinogram(1, 2, {1.0, 1.0}), proj);
        CHECK(std::abs(c1[0] - 0.75) <= 1e-12);
        CHECK(std::abs(c1[1] - 0.5) <= 1e-12);
        CHECK(pairing(mu1, f.values) == doctest::Approx(2.0).epsilon(1e-15));
    }

    SUBCASE("interior optimum: fixed point and KKT")
    {
        // One event in detector 1 and two in detector 2: the minimiser of
        // 2 m1 + m2 - log m1 - 2 log(m1 + m2) is (1, 1).
        const auto ks = KernelSet::build(toy_events({1, 2}), MotionModel(), proj, f, quiet());
        const auto run = mlem_run(uniform_start(f, ks.n()), f, ks, 2000);
        CHECK(run.mu[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(run.mu[1] == doctest::Approx(1.0).epsilon(1e-9));
        const auto next = mlem_step(run.mu, f, ks);
        REQUIRE(test::max_abs_diff(next.values(), run.mu.values()) <= 1e-10);
        const auto kkt = kkt_residual(run.mu, f, ks);
        CHECK(kkt.supp_grad_max <= 1e-8 * 2.0);
        CHECK(kkt.min_grad >= -1e-8 * 2.0);
        CHECK(run.gap_history.back() < 1e-6);
        CHECK(surrogate_gap(run.mu, run.mu, f) == 0.0);
    }

    SUBCASE("a non-optimal point violates the conditions")
    {
        const auto ks = KernelSet::build(toy_events({1, 2}), MotionModel(), proj, f, quiet());
        const auto kkt = kkt_residual(DensityImage(g, {0.3, 2.0}), f, ks);
        CHECK((kkt.min_grad < -1e-8 || kkt.supp_grad_max > 1e-6));
    }

    SUBCASE("no events")
    {
        const KernelSet none(g, {});
        CHECK(test::max_value(mlem_step(DensityImage(g, {1.0, 1.0}), f, none).values()) == 0.0);
        const auto kkt = kkt_residual(DensityImage(g, 0.0), f, none);
        CHECK(kkt.min_grad == 1.0);
        CHECK(support_union(none) == std::vector<std::uint8_t>{0, 0});
    }
}

TEST_CASE("ML-EM runs")
{
    const Problem p;

    SUBCASE("k_star = 0 returns the start")
    {
        const auto d = simulate_listmode(p.mu_r, MotionModel(), p.proj, 1);
        const auto f = sensitivity(MotionModel(), p.proj);
        const auto ks = KernelSet::build(d, MotionModel(), p.proj, f, quiet());
        const auto mu0 = uniform_start(f, ks.n());
        const auto st = mlem_run(mu0, f, ks, 0);
        CHECK(values_of(st.mu) == values_of(mu0));
        CHECK(st.loss_history.size() == 1);
        CHECK(st.mass_history.size() == 1);
        CHECK(st.gap_history.empty());
        CHECK_THROWS_AS(mlem_run(mu0, f, ks, -1), InvalidArgument);
        CHECK_THROWS_AS(mlem_run(DensityImage(p.geom, 0.0), f, ks, 1), InvalidArgument);
    }

    for (const auto& model : {MotionModel::translation(40.0 / 3.0, -10.0, 0.75),
                              MotionModel::diffeo(swirl_velocity(p.geom, 0.5, 0.15))}) {
        const auto d = simulate_listmode(p.mu_r, model, p.proj, 9);
        const auto f = sensitivity(model, p.proj);
        const auto ks = KernelSet::build(d, model, p.proj, f, quiet());
        const auto st = mlem_run(uniform_start(f, ks.n()), f, ks, 10);
        const double scale = std::abs(st.loss_history.front());
        const double n = ks.n();
        for (int k = 0; k < 10; ++k) {
            const double drop = st.loss_history[k] - st.loss_history[k + 1];
            CHECK(drop >= -1e-9 * scale);
            CHECK(st.gap_history[k] >= 0.0);
            CHECK(st.gap_history[k] <= drop + 1e-8 * scale);
            CHECK(std::abs(st.mass_history[k + 1] - n) <= 1e-9 * n);
        }
        for (std::size_t q = 0; q < p.geom.size(); ++q) {
            CHECK(st.mu[q] >= 0.0);
            if (!f.mask[q])
                CHECK(st.mu[q] == 0.0);
        }
    }

    SUBCASE("support after one step")
    {
        std::vector<Event> ev;
        for (std::uint32_t i = 0; i < p.proj.detectors(); ++i)
            ev.push_back({i, 0.5});
        const auto d = ListModeData::from_events(ev, p.proj.detectors());
        const auto f = sensitivity(MotionModel(), p.proj);
        const auto ks = KernelSet::build(d, MotionModel(), p.proj, f, quiet());
        const auto uni = support_union(ks);
        const auto a1 = p.proj.adjoint_ones();
        for (std::size_t q = 0; q < uni.size(); ++q)
            CHECK(uni[q] == (a1[q] > 0.0));
        const auto mu1 = mlem_step(uniform_start(f, ks.n()), f, ks);
        for (std::size_t q = 0; q < uni.size(); ++q)
            CHECK((mu1[q] > 0.0) == (uni[q] && f.mask[q]));
    }
}

TEST_CASE("classical ML-EM")
{
    const Problem p;
    const auto f = sensitivity(MotionModel(), p.proj);
    const auto mu = uniform_start(f, 1000.0);

    SUBCASE("consistent data is a fixed point")
    {
        const auto y = p.proj.forward(mu);
        const auto next = classical_mlem_step(mu, y, p.proj);
        for (std::size_t q = 0; q < p.geom.size(); ++q) {
            if (f.mask[q])
                CHECK(next[q] == doctest::Approx(mu[q]).epsilon(1e-12));
        }
    }

    SUBCASE("zero data")
    {
        const auto next = classical_mlem_step(mu, p.proj.make_sinogram(), p.proj);
        CHECK(test::max_value(next.values()) == 0.0);
    }

    SUBCASE("counts where the model predicts none")
    {
        std::vector<double> point(p.geom.size(), 0.0);
        point[p.geom.index(16, 16)] = 1.0;
        const DensityImage spot(p.geom, point);
        const auto Aspot = p.proj.forward(spot);
        auto y = p.proj.make_sinogram();
        std::size_t blind = 0;
        while (Aspot[blind] > 0.0)
            ++blind;
        y[blind] = 1.0;
        CHECK_THROWS_AS(classical_mlem_step(spot, y, p.proj), DomainViolation);
    }

    SUBCASE("static list-mode ML-EM reduces to classical ML-EM")
    {
        const auto d = simulate_listmode(p.mu_r, MotionModel(), p.proj, 13);
        const auto ks = KernelSet::build(d, MotionModel(), p.proj, f, quiet());
        const auto y = aggregate(d, p.config, 0.0, 1.0);
        const auto mu0 = uniform_start(f, ks.n());
        const auto a = mlem_run(mu0, f, ks, 10);
        const auto b = classical_mlem_run(mu0, y, p.proj, 10);
        CHECK(test::max_rel_diff(a.mu.values(), b.mu.values(), 1e-300) <= 1e-12);
        for (int k = 0; k <= 10; ++k)
            CHECK(a.loss_history[k] == doctest::Approx(b.loss_history[k]).epsilon(1e-12));

        DensityImage iter = mu0;
        for (int k = 0; k < 10; ++k)
            iter = classical_mlem_step(iter, y, p.proj);
        CHECK(values_of(iter) == values_of(b.mu));
    }
}

TEST_CASE("gated ML-EM")
{
    const Problem p;
    const auto model = MotionModel::piecewise(
        {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0},
        {MotionModel::translation(0.0, -6.0, 1.0), MotionModel::translation(0.0, -3.0, 1.0),
         MotionModel()});
    const auto d = simulate_listmode(p.mu_r, model, p.proj, 21);
    const auto counts = gate_counts(d, model, p.config);
    const auto f = sensitivity(model, p.proj);
    const auto& pw = std::get<PiecewiseMotion>(model.variant());

    SUBCASE("gate counts partition the events")
    {
        REQUIRE(counts.size() == 3);
        double total = 0.0;
        for (const auto& c : counts)
            total += test::sum(c.values());
        CHECK(total == static_cast<double>(d.n()));
        CHECK_THROWS_AS(gate_counts(d, MotionModel(), p.config), InvalidArgument);
    }

    SUBCASE("stacked-operator form")
    {
        // A~_s = dt_s A W_s with W_s the gate's pull-back.
        const auto mu = uniform_start(f, static_cast<double>(d.n()));
        std::vector<double> denom(p.geom.size(), 0.0), numer(p.geom.size(), 0.0);
        for (std::size_t s = 0; s < 3; ++s) {
            const double dt = pw.times[s + 1] - pw.times[s];
            const auto& m = pw.models[s];
            const auto Amu = p.proj.forward(pull_back_transpose(m, 0.0, mu));
            auto ratio = p.proj.make_sinogram();
            for (std::size_t i = 0; i < ratio.size(); ++i) {
                if (counts[s][i] > 0.0)
                    ratio[i] = counts[s][i] / (dt * Amu[i]);
            }
            const auto back = adjoint_apply(m, 0.0, p.proj.adjoint(ratio));
            const auto ones = adjoint_apply(m, 0.0, p.proj.adjoint_ones());
            for (std::size_t q = 0; q < numer.size(); ++q) {
                numer[q] += dt * back[q];
                denom[q] += dt * ones[q];
            }
        }
        const auto got = gated_mlem_step(mu, counts, model, p.proj);
        for (std::size_t q = 0; q < p.geom.size(); ++q) {
            const double expect = f.mask[q] ? mu[q] / denom[q] * numer[q] : 0.0;
            CHECK(std::abs(got[q] - expect) <= 1e-12 * std::max(expect, 1e-300));
        }
    }

    SUBCASE("a gate without events only enters the denominator")
    {
        const auto two = MotionModel::piecewise({0.0, 0.5, 1.0},
                                                {MotionModel::translation(0.0, -4.0, 1.0), MotionModel()});
        const auto c1 = p.proj.forward(p.mu_r);
        const std::vector<Sinogram> split{c1, p.proj.make_sinogram()};
        const auto f2 = sensitivity(two, p.proj);
        const auto mu = uniform_start(f2, 100.0);
        const auto first = std::get<PiecewiseMotion>(two.variant()).models[0];
        const auto Amu = p.proj.forward(pull_back_transpose(first, 0.0, mu));
        auto ratio = p.proj.make_sinogram();
        for (std::size_t i = 0; i < ratio.size(); ++i) {
            if (c1[i] > 0.0)
                ratio[i] = c1[i] / Amu[i];
        }
        const auto back = adjoint_apply(first, 0.0, p.proj.adjoint(ratio));
        const auto got = gated_mlem_step(mu, split, two, p.proj);
        for (std::size_t q = 0; q < p.geom.size(); ++q) {
            const double expect = f2.mask[q] ? mu[q] / f2.values[q] * back[q] : 0.0;
            CHECK(std::abs(got[q] - expect) <= 1e-12 * std::max(expect, 1e-300));
        }
    }

    SUBCASE("single static gate is classical ML-EM")
    {
        const auto one = MotionModel::piecewise({0.0, 1.0}, {MotionModel()});
        const auto y = p.proj.forward(p.mu_r);
        const auto mu = uniform_start(sensitivity(MotionModel(), p.proj), 50.0);
        CHECK(values_of(gated_mlem_step(mu, {y}, one, p.proj))
              == values_of(classical_mlem_step(mu, y, p.proj)));
    }

    SUBCASE("list-mode ML-EM under the gated model matches")
    {
        const auto ks = KernelSet::build(d, model, p.proj, f, quiet());
        const auto mu0 = uniform_start(f, ks.n());
        const auto a = mlem_run(mu0, f, ks, 10);
        const auto b = gated_mlem_run(mu0, counts, model, p.proj, 10);
        CHECK(test::max_rel_diff(a.mu.values(), b.mu.values(), 1e-300) <= 1e-10);
    }

    SUBCASE("model requirements")
    {
        const auto mu = uniform_start(f, 10.0);
        CHECK_THROWS_AS(gated_mlem_step(mu, counts, MotionModel(), p.proj), InvalidArgument);
        CHECK_THROWS_AS(gated_mlem_step(mu, {counts[0]}, model, p.proj), InvalidArgument);
    }
}
