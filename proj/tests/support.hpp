#pragma once

// Shared fixtures for the test programs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mcpet/image.hpp"
#include "mcpet/projector.hpp"

namespace mcpet::test {

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo = 0.0,
                                         double hi = 1.0)
{
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v)
        x = d(rng);
    return v;
}

inline DensityImage random_density(std::mt19937_64& rng, const GridGeometry& g)
{
    return DensityImage(g, random_values(rng, g.size()));
}

inline GridFunction random_function(std::mt19937_64& rng, const GridGeometry& g, double lo = -1.0,
                                    double hi = 1.0)
{
    return GridFunction(g, random_values(rng, g.size(), lo, hi));
}

//! Smooth nonnegative blob field on the grid: a few Gaussians.
inline std::vector<double> smooth_blobs(std::mt19937_64& rng, const GridGeometry& g, int blobs,
                                        double spread, double sigma)
{
    std::uniform_real_distribution<double> pos(-spread, spread);
    std::vector<double> v(g.size(), 0.0);
    for (int b = 0; b < blobs; ++b) {
        const Vec2 c{pos(rng), pos(rng)};
        for (std::size_t p = 0; p < g.size(); ++p) {
            const Vec2 d = g.center(p) - c;
            v[p] += std::exp(-(d.x * d.x + d.y * d.y) / (2.0 * sigma * sigma));
        }
    }
    return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

//! max |a - b| / max(|b|, floor).
inline double max_rel_diff(std::span<const double> a, std::span<const double> b,
                           double floor = 1e-300)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
    return m;
}

inline double max_value(std::span<const double> a)
{
    double m = 0.0;
    for (double x : a)
        m = std::max(m, std::abs(x));
    return m;
}

inline double sum(std::span<const double> a)
{
    double s = 0.0;
    for (double x : a)
        s += x;
    return s;
}

//! Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("mcpet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

//! The 2 x 1 toy: pixels of unit area, a_1 = (1, 0), a_2 = (1, 1).
inline GridGeometry toy_geometry() { return GridGeometry(2, 1, 0.0, 2.0, 0.0, 1.0); }

inline Projector toy_projector()
{
    const auto g = toy_geometry();
    return Projector::from_profiles(g, {GridFunction(g, {1.0, 0.0}), GridFunction(g, {1.0, 1.0})});
}

}  // namespace mcpet::test
