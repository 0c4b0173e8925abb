#include "mcpet/phantom.hpp"

#include <cmath>
#include <numbers>

#include "mcpet/errors.hpp"

namespace mcpet {
namespace {

constexpr double kOuterRadius = 17.0;
constexpr int kSupersample = 4;

// cos/sin with the exact zeros restored, so sectors bisected by the axes are
// mirror images of themselves bit for bit.
double snap(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

}  // namespace

const std::vector<double>& derenzo_radii()
{
    static const std::vector<double> radii{1.8, 1.4, 1.1, 0.9, 0.7, 0.55};
    return radii;
}

std::vector<Disk> derenzo_rods()
{
    std::vector<Disk> rods;
    const auto& radii = derenzo_radii();
    for (std::size_t s = 0; s < radii.size(); ++s) {
        const double r = radii[s];
        const double angle = std::numbers::pi / 2.0 + static_cast<double>(s) * std::numbers::pi / 3.0;
        const Vec2 axis{snap(std::cos(angle)), snap(std::sin(angle))};
        const Vec2 lateral{-axis.y, axis.x};
        const double spacing = 4.0 * r;
        const double row_step = spacing * std::sqrt(3.0) / 2.0;
        // Apex offset keeps r + 1/2 clearance from both sector edges.
        const double first_row = 2.0 * r + 1.0;
        for (int row = 1;; ++row) {
            const double depth = first_row + (row - 1) * row_step;
            if (depth + r > kOuterRadius)
                break;
            for (int j = 0; j < row; ++j) {
                const double offset = (j - (row - 1) / 2.0) * spacing;
                const Vec2 c = depth * axis + offset * lateral;
                if (std::hypot(c.x, c.y) + r <= kOuterRadius)
                    rods.push_back({c, r});
            }
        }
    }
    return rods;
}

DensityImage make_derenzo(const GridGeometry& geom, double dose)
{
    if (!(dose > 0.0) || !std::isfinite(dose))
        throw InvalidArgument("make_derenzo: dose must be positive");
    const auto rods = derenzo_rods();
    std::vector<double> values(geom.size(), 0.0);
    const double sub = 1.0 / kSupersample;
    for (std::size_t iy = 0; iy < geom.ny(); ++iy) {
        for (std::size_t ix = 0; ix < geom.nx(); ++ix) {
            const Vec2 c = geom.center(ix, iy);
            if (std::hypot(c.x, c.y) > kOuterRadius + geom.dx() + geom.dy())
                continue;
            int hits = 0;
            for (int a = 0; a < kSupersample; ++a) {
                for (int b = 0; b < kSupersample; ++b) {
                    const double px = c.x + ((a + 0.5) * sub - 0.5) * geom.dx();
                    const double py = c.y + ((b + 0.5) * sub - 0.5) * geom.dy();
                    for (const auto& rod : rods) {
                        const double ddx = px - rod.center.x;
                        const double ddy = py - rod.center.y;
                        if (ddx * ddx + ddy * ddy <= rod.radius * rod.radius) {
                            ++hits;
                            break;
                        }
                    }
                }
            }
            values[geom.index(ix, iy)] =
                dose * static_cast<double>(hits) / (kSupersample * kSupersample);
        }
    }
    return DensityImage(geom, std::move(values));
}

}  // namespace mcpet
