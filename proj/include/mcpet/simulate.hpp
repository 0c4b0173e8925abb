#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "mcpet/image.hpp"
#include "mcpet/motion.hpp"
#include "mcpet/projector.hpp"
#include "mcpet/random.hpp"

namespace mcpet {

struct Event
{
    std::uint32_t detector = 0;
    double time = 0.0;

    friend bool operator==(const Event&, const Event&) = default;
};

/*!
 * Detection events grouped by detector (ascending), times ascending within
 * a detector. counts[i] is the number of events of detector i.
 */
struct ListModeData
{
    std::vector<Event> events;
    std::vector<std::size_t> counts;

    std::size_t n() const { return events.size(); }

    //! Builds counts from events; throws if an event is out of range.
    static ListModeData from_events(std::vector<Event> events, std::size_t detectors);

    friend bool operator==(const ListModeData&, const ListModeData&) = default;
};

//! beta_i(t) = <mu_r, W_t* a_i>.
double intensity(const DensityImage& mu_r, const MotionModel& model, const Projector& proj,
                 std::size_t detector, double t);

//! safety * max_k beta_i(k / (grid - 1)), k = 0 .. grid - 1.
double intensity_bound(const DensityImage& mu_r, const MotionModel& model, const Projector& proj,
                       std::size_t detector, int time_grid_size = 256, double safety = 1.1);

/*!
 * Evaluates beta_i(t) for one fixed (mu_r, model, projector).
 *
 * Pairings only visit the support of mu_r. Values for motion states with a
 * state key are memoised, so static and gated models evaluate each
 * (detector, state) once.
 */
class IntensityField
{
  public:
    IntensityField(const DensityImage& mu_r, const MotionModel& model, const Projector& proj);

    double operator()(std::size_t detector, double t);

    //! beta(t) for every detector at once, via transport of mu_r.
    std::vector<double> all_detectors(double t) const;

    //! safety * grid maximum of beta_i for every detector.
    std::vector<double> bounds(int time_grid_size, double safety) const;

    bool empty() const { return support_.empty(); }

  private:
    DensityImage mu_;
    MotionModel model_;
    Projector proj_;
    std::vector<std::uint32_t> support_;
    ProjectionIndex index_;
    std::map<std::tuple<std::uint32_t, std::uint64_t, std::size_t>, double> cache_;
};

/*!
 * Thinning on [0, 1]: parent times from a homogeneous process of rate
 * `bound` (exponential gaps), each kept when u * bound < beta(t) for a
 * fresh uniform u. Calls on_violation(t, beta) if beta(t) > bound.
 */
template <class Beta, class Accept, class Violation>
void thin_poisson(RandomStream& rng, double bound, Beta&& beta, Accept&& accept,
                  Violation&& on_violation)
{
    if (!(bound > 0.0))
        return;
    double t = 0.0;
    while (true) {
        t += rng.exponential(bound);
        if (t > 1.0)
            return;
        const double u = rng.uniform();
        const double b = beta(t);
        if (b > bound)
            on_violation(t, b);
        if (u * bound < b)
            accept(t);
    }
}

struct SimulationOptions
{
    int time_grid_size = 256;
    double safety = 1.1;
};

/*!
 * Independent inhomogeneous Poisson processes, one per detector, by
 * thinning a homogeneous process of rate M_i. Detector i draws from the
 * stream (seed, i), so the result does not depend on evaluation order.
 * Throws BoundViolation if some beta_i(t) exceeds M_i.
 */
ListModeData simulate_listmode(const DensityImage& mu_r, const MotionModel& model,
                               const Projector& proj, std::uint64_t seed,
                               const SimulationOptions& options = {});

//! Per-detector counts of events with time in [t1, t2), or [t1, 1] when t2 == 1.
Sinogram aggregate(const ListModeData& data, const ProjectorConfig& config, double t1, double t2);

}  // namespace mcpet
