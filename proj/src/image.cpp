#include "mcpet/image.hpp"

#include <cmath>
#include <string>

#include "mcpet/errors.hpp"

namespace mcpet {

GridGeometry::GridGeometry(std::size_t nx, std::size_t ny, double x_min,
                           double x_max, double y_min, double y_max)
    : nx_(nx), ny_(ny), x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max)
{
    if (nx == 0 || ny == 0)
        throw InvalidArgument("grid needs at least one pixel per axis");
    if (!(x_min < x_max) || !(y_min < y_max))
        throw InvalidArgument("grid extent must satisfy min < max on both axes");
    dx_ = (x_max - x_min) / static_cast<double>(nx);
    dy_ = (y_max - y_min) / static_cast<double>(ny);
}

GridGeometry GridGeometry::square(std::size_t n, double half_side)
{
    return GridGeometry(n, n, -half_side, half_side, -half_side, half_side);
}

GridFunction::GridFunction(GridGeometry geom, double fill)
    : geom_(geom), values_(geom.size(), fill)
{
}

GridFunction::GridFunction(GridGeometry geom, std::vector<double> values)
    : geom_(geom), values_(std::move(values))
{
    if (values_.size() != geom_.size())
        throw GeometryMismatch("grid function has " + std::to_string(values_.size())
                               + " samples, grid has " + std::to_string(geom_.size()));
}

DensityImage::DensityImage(GridGeometry geom, double fill)
    : DensityImage(geom, std::vector<double>(geom.size(), fill))
{
}

DensityImage::DensityImage(GridGeometry geom, std::vector<double> values)
    : geom_(geom), values_(std::move(values))
{
    if (values_.size() != geom_.size())
        throw GeometryMismatch("density image has " + std::to_string(values_.size())
                               + " samples, grid has " + std::to_string(geom_.size()));
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidArgument("density values must be finite and nonnegative");
    }
}

void require_same_geometry(const GridGeometry& a, const GridGeometry& b,
                           const char* where)
{
    if (!(a == b))
        throw GeometryMismatch(std::string(where) + ": grid geometries differ");
}

double pairing(const DensityImage& mu, const GridFunction& g)
{
    require_same_geometry(mu.geometry(), g.geometry(), "pairing");
    auto m = mu.values();
    auto v = g.values();
    double acc = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p)
        acc += m[p] * v[p];
    return mu.geometry().pixel_area() * acc;
}

double pairing(std::span<const double> mu, const SparseFunction& g, double pixel_area)
{
    double acc = 0.0;
    for (std::size_t k = 0; k < g.index.size(); ++k)
        acc += mu[g.index[k]] * g.value[k];
    return pixel_area * acc;
}

double pairing(const DensityImage& mu, const SparseFunction& g)
{
    if (!g.empty() && g.index.back() >= mu.size())
        throw GeometryMismatch("pairing: sparse support exceeds the grid");
    return pairing(mu.values(), g, mu.geometry().pixel_area());
}

double total_mass(const DensityImage& mu)
{
    double acc = 0.0;
    for (double v : mu.values())
        acc += v;
    return mu.geometry().pixel_area() * acc;
}

GridFunction to_dense(const SparseFunction& s, const GridGeometry& geom)
{
    GridFunction out(geom);
    for (std::size_t k = 0; k < s.index.size(); ++k)
        out[s.index[k]] = s.value[k];
    return out;
}

SparseFunction to_sparse(const GridFunction& g)
{
    SparseFunction s;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (g[p] != 0.0) {
            s.index.push_back(static_cast<std::uint32_t>(p));
            s.value.push_back(g[p]);
        }
    }
    return s;
}

BilinearStencil bilinear_stencil(const GridGeometry& geom, Vec2 point)
{
    const double u = (point.x - geom.x_min()) / geom.dx() - 0.5;
    const double v = (point.y - geom.y_min()) / geom.dy() - 0.5;
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double wu = u - fu;
    const double wv = v - fv;

    BilinearStencil st;
    const auto nx = static_cast<std::int64_t>(geom.nx());
    const auto ny = static_cast<std::int64_t>(geom.ny());
    // Guard against points far outside the grid before the integer cast.
    if (!(fu >= -2.0 && fu <= static_cast<double>(nx) + 1.0 && fv >= -2.0
          && fv <= static_cast<double>(ny) + 1.0)) {
        st.index = {-1, -1, -1, -1};
        st.weight = {0.0, 0.0, 0.0, 0.0};
        return st;
    }
    const auto i0 = static_cast<std::int64_t>(fu);
    const auto j0 = static_cast<std::int64_t>(fv);
    const std::array<std::int64_t, 4> ii{i0, i0 + 1, i0, i0 + 1};
    const std::array<std::int64_t, 4> jj{j0, j0, j0 + 1, j0 + 1};
    st.weight = {(1.0 - wu) * (1.0 - wv), wu * (1.0 - wv), (1.0 - wu) * wv, wu * wv};
    for (int c = 0; c < 4; ++c) {
        const bool inside = ii[c] >= 0 && ii[c] < nx && jj[c] >= 0 && jj[c] < ny;
        st.index[c] = inside ? jj[c] * nx + ii[c] : -1;
        if (!inside)
            st.weight[c] = 0.0;
    }
    return st;
}

double sample_bilinear(const GridGeometry& geom, std::span<const double> values,
                       Vec2 point)
{
    const auto st = bilinear_stencil(geom, point);
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) {
        if (st.index[c] >= 0)
            acc += st.weight[c] * values[static_cast<std::size_t>(st.index[c])];
    }
    return acc;
}

}  // namespace mcpet
