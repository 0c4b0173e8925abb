#include "mcpet/simulate.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "mcpet/errors.hpp"

namespace mcpet {

ListModeData ListModeData::from_events(std::vector<Event> events, std::size_t detectors)
{
    ListModeData d;
    d.counts.assign(detectors, 0);
    for (const auto& e : events) {
        if (e.detector >= detectors)
            throw InvalidArgument("event detector " + std::to_string(e.detector) + " out of range");
        if (!(e.time >= 0.0 && e.time <= 1.0))
            throw InvalidArgument("event time outside [0, 1]");
        ++d.counts[e.detector];
    }
    d.events = std::move(events);
    return d;
}

double intensity(const DensityImage& mu_r, const MotionModel& model, const Projector& proj,
                 std::size_t detector, double t)
{
    require_same_geometry(proj.geometry(), mu_r.geometry(), "intensity");
    const ProjectionIndex index(proj);
    return pull_back_pairing(model.warp_at(t), proj, index, detector, mu_r.values());
}

double intensity_bound(const DensityImage& mu_r, const MotionModel& model, const Projector& proj,
                       std::size_t detector, int time_grid_size, double safety)
{
    if (time_grid_size < 2 || !(safety > 1.0))
        throw InvalidArgument("intensity_bound: need time_grid_size >= 2 and safety > 1");
    require_same_geometry(proj.geometry(), mu_r.geometry(), "intensity_bound");
    const ProjectionIndex index(proj);
    double best = 0.0;
    for (int k = 0; k < time_grid_size; ++k) {
        const double t = static_cast<double>(k) / (time_grid_size - 1);
        best = std::max(best, pull_back_pairing(model.warp_at(t), proj, index, detector,
                                                mu_r.values()));
    }
    return safety * best;
}

namespace {

std::vector<std::uint32_t> support_of(const DensityImage& mu)
{
    std::vector<std::uint32_t> s;
    for (std::size_t p = 0; p < mu.size(); ++p) {
        if (mu[p] > 0.0)
            s.push_back(static_cast<std::uint32_t>(p));
    }
    return s;
}

}  // namespace

IntensityField::IntensityField(const DensityImage& mu_r, const MotionModel& model,
                               const Projector& proj)
    : mu_(mu_r), model_(model), proj_(proj), support_(support_of(mu_r)), index_(proj, support_)
{
    require_same_geometry(proj.geometry(), mu_r.geometry(), "IntensityField");
}

double IntensityField::operator()(std::size_t detector, double t)
{
    const Warp warp = model_.warp_at(t);
    const auto key = model_.state_key(t);
    if (!key)
        return pull_back_pairing(warp, proj_, index_, detector, mu_.values());
    const auto ck = std::make_tuple(key->gate, key->state, detector);
    if (const auto it = cache_.find(ck); it != cache_.end())
        return it->second;
    const double v = pull_back_pairing(warp, proj_, index_, detector, mu_.values());
    cache_.emplace(ck, v);
    return v;
}

std::vector<double> IntensityField::all_detectors(double t) const
{
    const auto& geom = proj_.geometry();
    std::vector<double> moved(geom.size());
    pull_back_transpose(model_.warp_at(t), geom, support_, mu_.values(), moved);
    std::vector<double> out(proj_.detectors());
    proj_.forward(moved, out);
    return out;
}

std::vector<double> IntensityField::bounds(int time_grid_size, double safety) const
{
    if (time_grid_size < 2 || !(safety > 1.0))
        throw InvalidArgument("bounds: need time_grid_size >= 2 and safety > 1");
    std::vector<double> best(proj_.detectors(), 0.0);
    if (support_.empty())
        return best;
    std::optional<MotionStateKey> last_key;
    for (int k = 0; k < time_grid_size; ++k) {
        const double t = static_cast<double>(k) / (time_grid_size - 1);
        // Consecutive grid times in one motion state give identical values.
        const auto key = model_.state_key(t);
        if (key && last_key && *key == *last_key)
            continue;
        last_key = key;
        const auto beta = all_detectors(t);
        for (std::size_t i = 0; i < best.size(); ++i)
            best[i] = std::max(best[i], beta[i]);
    }
    for (auto& b : best)
        b *= safety;
    return best;
}

ListModeData simulate_listmode(const DensityImage& mu_r, const MotionModel& model,
                               const Projector& proj, std::uint64_t seed,
                               const SimulationOptions& options)
{
    IntensityField beta(mu_r, model, proj);
    const std::size_t m = proj.detectors();
    std::vector<Event> events;
    if (beta.empty())
        return ListModeData::from_events(std::move(events), m);

    const auto bound = beta.bounds(options.time_grid_size, options.safety);
    for (std::size_t i = 0; i < m; ++i) {
        const double M = bound[i];
        RandomStream rng(seed, i);
        thin_poisson(
            rng, M, [&](double t) { return beta(i, t); },
            [&](double t) { events.push_back({static_cast<std::uint32_t>(i), t}); },
            [&](double t, double b) {
                throw BoundViolation("intensity " + std::to_string(b) + " of detector "
                                     + std::to_string(i) + " at t = " + std::to_string(t)
                                     + " exceeds its bound " + std::to_string(M)
                                     + "; refine the time grid");
            });
    }
    return ListModeData::from_events(std::move(events), m);
}

Sinogram aggregate(const ListModeData& data, const ProjectorConfig& config, double t1, double t2)
{
    if (!(t1 >= 0.0 && t1 < t2 && t2 <= 1.0))
        throw InvalidArgument("aggregate: need 0 <= t1 < t2 <= 1");
    if (data.counts.size() != config.detectors())
        throw GeometryMismatch("aggregate: list-mode data and projector disagree on detector count");
    Sinogram s(config.n_angles, config.n_tangential);
    for (const auto& e : data.events) {
        if (e.time >= t1 && (e.time < t2 || (t2 == 1.0 && e.time == 1.0)))
            s[e.detector] += 1.0;
    }
    return s;
}

}  // namespace mcpet
