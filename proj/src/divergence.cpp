#include "mcpet/divergence.hpp"

#include <cmath>
#include <limits>

#include "mcpet/errors.hpp"

namespace mcpet {

double kl_vec(std::span<const double> u, std::span<const double> v)
{
    if (u.size() != v.size())
        throw InvalidArgument("kl_vec: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0.0 || v[i] < 0.0)
            throw InvalidArgument("kl_vec: arguments must be nonnegative");
        if (u[i] == 0.0) {
            acc += v[i];
            continue;
        }
        if (v[i] == 0.0)
            return std::numeric_limits<double>::infinity();
        acc += u[i] * std::log(u[i] / v[i]) - u[i] + v[i];
    }
    // Each summand is >= 0 in exact arithmetic; clamp rounding residue.
    return acc < 0.0 ? 0.0 : acc;
}

double kl_images(const DensityImage& p, const DensityImage& q)
{
    require_same_geometry(p.geometry(), q.geometry(), "kl_images");
    return p.geometry().pixel_area() * kl_vec(p.values(), q.values());
}

}  // namespace mcpet
