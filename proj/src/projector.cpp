#include "mcpet/projector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "mcpet/errors.hpp"

namespace mcpet {
namespace {

constexpr int kSub = 4;
constexpr int kSubCount = kSub * kSub;

}  // namespace

struct Projector::Data
{
    Data(GridGeometry g, ProjectorConfig c) : geom(g), config(c) {}

    GridGeometry geom;
    ProjectorConfig config;
    bool strip = false;
    std::vector<SparseFunction> profiles;

    // Strip model: per-view trig and sorted subsample offsets along the normal.
    std::vector<double> cos_a;
    std::vector<double> sin_a;
    std::vector<std::array<double, kSubCount>> offsets;
    double max_offset = 0.0;

    // Explicit model: dense copies for random access.
    std::vector<std::vector<double>> dense;

    double strip_value(std::size_t i, std::size_t pixel) const
    {
        const std::size_t a = i / config.n_tangential;
        const std::size_t j = i % config.n_tangential;
        const Vec2 c = geom.center(pixel);
        if (c.x * c.x + c.y * c.y > config.fov_radius * config.fov_radius)
            return 0.0;
        const double u = c.x * cos_a[a] + c.y * sin_a[a];
        const double lo = config.bin_edge(j) - u;
        const double hi = config.bin_edge(j + 1) - u;
        if (hi <= -max_offset || lo > max_offset)
            return 0.0;
        const auto& off = offsets[a];
        const auto first = std::lower_bound(off.begin(), off.end(), lo);
        const auto last = std::lower_bound(first, off.end(), hi);
        return static_cast<double>(last - first) / kSubCount;
    }
};

double ProjectorConfig::angle(std::size_t a) const
{
    return std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
}

double ProjectorConfig::bin_edge(std::size_t j) const
{
    return -fov_radius + static_cast<double>(j) * detector_width;
}

ProjectorConfig ProjectorConfig::for_geometry(std::size_t n_angles, std::size_t n_tangential,
                                              const GridGeometry& geom)
{
    if (n_angles == 0 || n_tangential == 0)
        throw InvalidArgument("projector needs at least one view and one tangential bin");
    ProjectorConfig c;
    c.n_angles = n_angles;
    c.n_tangential = n_tangential;
    c.fov_radius = 0.5 * std::min(geom.x_max() - geom.x_min(), geom.y_max() - geom.y_min());
    c.detector_width = 2.0 * c.fov_radius / static_cast<double>(n_tangential);
    return c;
}

Sinogram::Sinogram(std::size_t n_angles, std::size_t n_tangential, double fill)
    : n_angles_(n_angles), n_tangential_(n_tangential), values_(n_angles * n_tangential, fill)
{
}

Sinogram::Sinogram(std::size_t n_angles, std::size_t n_tangential, std::vector<double> values)
    : n_angles_(n_angles), n_tangential_(n_tangential), values_(std::move(values))
{
    if (values_.size() != n_angles_ * n_tangential_)
        throw GeometryMismatch("sinogram has " + std::to_string(values_.size())
                               + " bins, layout needs "
                               + std::to_string(n_angles_ * n_tangential_));
}

Projector Projector::parallel_strip(const ProjectorConfig& config, const GridGeometry& geom)
{
    if (config.detectors() == 0 || !(config.detector_width > 0.0) || !(config.fov_radius > 0.0))
        throw InvalidArgument("parallel_strip: invalid projector configuration");
    auto d = std::make_shared<Data>(geom, config);
    d->strip = true;
    d->cos_a.resize(config.n_angles);
    d->sin_a.resize(config.n_angles);
    d->offsets.resize(config.n_angles);
    for (std::size_t a = 0; a < config.n_angles; ++a) {
        const double th = config.angle(a);
        d->cos_a[a] = std::cos(th);
        d->sin_a[a] = std::sin(th);
        int k = 0;
        for (int sx = 0; sx < kSub; ++sx) {
            for (int sy = 0; sy < kSub; ++sy) {
                const double ox = ((sx + 0.5) / kSub - 0.5) * geom.dx();
                const double oy = ((sy + 0.5) / kSub - 0.5) * geom.dy();
                d->offsets[a][k++] = ox * d->cos_a[a] + oy * d->sin_a[a];
            }
        }
        std::sort(d->offsets[a].begin(), d->offsets[a].end());
        d->max_offset = std::max(d->max_offset, std::max(-d->offsets[a].front(), d->offsets[a].back()));
    }

    // Sweep each view in tangential order, so every strip only visits the
    // pixels whose centres project near it.
    d->profiles.resize(config.detectors());
    std::vector<double> coord(geom.size());
    std::vector<std::uint32_t> order(geom.size());
    for (std::size_t a = 0; a < config.n_angles; ++a) {
        for (std::size_t p = 0; p < geom.size(); ++p) {
            const Vec2 c = geom.center(p);
            coord[p] = c.x * d->cos_a[a] + c.y * d->sin_a[a];
        }
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](auto l, auto r) { return coord[l] < coord[r]; });
        std::vector<double> sorted(geom.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            sorted[k] = coord[order[k]];
        for (std::size_t j = 0; j < config.n_tangential; ++j) {
            const std::size_t i = a * config.n_tangential + j;
            const double lo = config.bin_edge(j) - d->max_offset - 1e-9;
            const double hi = config.bin_edge(j + 1) + d->max_offset + 1e-9;
            const auto b = std::lower_bound(sorted.begin(), sorted.end(), lo) - sorted.begin();
            const auto e = std::upper_bound(sorted.begin(), sorted.end(), hi) - sorted.begin();
            std::vector<std::uint32_t> pix(order.begin() + b, order.begin() + e);
            std::sort(pix.begin(), pix.end());
            auto& prof = d->profiles[i];
            for (auto p : pix) {
                const double v = d->strip_value(i, p);
                if (v > 0.0) {
                    prof.index.push_back(p);
                    prof.value.push_back(v);
                }
            }
        }
    }
    return Projector(std::move(d));
}

Projector Projector::from_profiles(const GridGeometry& geom, const std::vector<GridFunction>& profiles)
{
    if (profiles.empty())
        throw InvalidArgument("from_profiles: need at least one detector");
    auto d = std::make_shared<Data>(geom, ProjectorConfig{});
    d->config.n_angles = 1;
    d->config.n_tangential = profiles.size();
    for (const auto& g : profiles) {
        require_same_geometry(geom, g.geometry(), "from_profiles");
        for (double v : g.values()) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw InvalidArgument("from_profiles: detector profiles must be finite and >= 0");
        }
        d->profiles.push_back(to_sparse(g));
        d->dense.emplace_back(g.values().begin(), g.values().end());
    }
    return Projector(std::move(d));
}

const GridGeometry& Projector::geometry() const { return data_->geom; }
const ProjectorConfig& Projector::config() const { return data_->config; }
std::size_t Projector::detectors() const { return data_->profiles.size(); }
bool Projector::is_strip_model() const { return data_->strip; }

const SparseFunction& Projector::profile(std::size_t i) const
{
    if (i >= detectors())
        throw InvalidArgument("detector index " + std::to_string(i) + " out of range");
    return data_->profiles[i];
}

double Projector::profile_value(std::size_t i, std::size_t pixel) const
{
    if (data_->strip)
        return data_->strip_value(i, pixel);
    return data_->dense[i][pixel];
}

GridFunction Projector::detector_profile(std::size_t i) const
{
    return to_dense(profile(i), geometry());
}

Sinogram Projector::make_sinogram(double fill) const
{
    return Sinogram(config().n_angles, config().n_tangential, fill);
}

void Projector::forward(std::span<const double> mu, std::span<double> out) const
{
    const double area = geometry().pixel_area();
    for (std::size_t i = 0; i < data_->profiles.size(); ++i)
        out[i] = pairing(mu, data_->profiles[i], area);
}

Sinogram Projector::forward(const DensityImage& mu) const
{
    require_same_geometry(geometry(), mu.geometry(), "forward");
    Sinogram s = make_sinogram();
    forward(mu.values(), s.values());
    return s;
}

void Projector::adjoint(std::span<const double> lambda, std::span<double> out) const
{
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < data_->profiles.size(); ++i) {
        const double w = lambda[i];
        if (w == 0.0)
            continue;
        const auto& prof = data_->profiles[i];
        for (std::size_t k = 0; k < prof.index.size(); ++k)
            out[prof.index[k]] += w * prof.value[k];
    }
}

GridFunction Projector::adjoint(const Sinogram& lambda) const
{
    require_same_layout(*this, lambda, "adjoint");
    GridFunction out(geometry());
    adjoint(lambda.values(), out.values());
    return out;
}

GridFunction Projector::adjoint_ones() const
{
    return adjoint(make_sinogram(1.0));
}

Vec2 Projector::strip_normal(std::size_t i) const
{
    const std::size_t a = i / config().n_tangential;
    return {data_->cos_a[a], data_->sin_a[a]};
}

double Projector::strip_center(std::size_t i) const
{
    const std::size_t j = i % config().n_tangential;
    return config().bin_edge(j) + 0.5 * config().detector_width;
}

double Projector::strip_reach() const
{
    const auto& g = geometry();
    return 0.5 * config().detector_width + data_->max_offset + g.dx() + g.dy();
}

void require_same_layout(const Projector& proj, const Sinogram& s, const char* where)
{
    if (s.n_angles() != proj.config().n_angles || s.n_tangential() != proj.config().n_tangential)
        throw GeometryMismatch(std::string(where) + ": sinogram layout does not match the projector");
}

ProjectionIndex::ProjectionIndex(const Projector& proj)
    : ProjectionIndex(proj, [&] {
          std::vector<std::uint32_t> all(proj.geometry().size());
          std::iota(all.begin(), all.end(), 0u);
          return all;
      }())
{
}

ProjectionIndex::ProjectionIndex(const Projector& proj, std::vector<std::uint32_t> pixels)
    : proj_(proj), pixels_(std::move(pixels))
{
    if (!proj_.is_strip_model())
        return;
    const auto& geom = proj_.geometry();
    const std::size_t views = proj_.config().n_angles;
    sorted_coord_.resize(views);
    sorted_pixel_.resize(views);
    std::vector<std::pair<double, std::uint32_t>> tmp(pixels_.size());
    for (std::size_t a = 0; a < views; ++a) {
        const Vec2 n = proj_.strip_normal(a * proj_.config().n_tangential);
        for (std::size_t k = 0; k < pixels_.size(); ++k) {
            const Vec2 c = geom.center(pixels_[k]);
            tmp[k] = {c.x * n.x + c.y * n.y, pixels_[k]};
        }
        std::sort(tmp.begin(), tmp.end());
        sorted_coord_[a].resize(tmp.size());
        sorted_pixel_[a].resize(tmp.size());
        for (std::size_t k = 0; k < tmp.size(); ++k) {
            sorted_coord_[a][k] = tmp[k].first;
            sorted_pixel_[a][k] = tmp[k].second;
        }
    }
}

std::span<const std::uint32_t> ProjectionIndex::candidates(std::size_t i, Vec2 shift,
                                                           double radius) const
{
    if (!proj_.is_strip_model())
        return pixels_;
    const std::size_t a = i / proj_.config().n_tangential;
    const Vec2 n = proj_.strip_normal(i);
    const double centre = proj_.strip_center(i) - (shift.x * n.x + shift.y * n.y);
    const double reach = proj_.strip_reach() + radius + 1e-9;
    const auto& coord = sorted_coord_[a];
    const auto b = std::lower_bound(coord.begin(), coord.end(), centre - reach) - coord.begin();
    const auto e = std::upper_bound(coord.begin(), coord.end(), centre + reach) - coord.begin();
    return std::span<const std::uint32_t>(sorted_pixel_[a]).subspan(
        static_cast<std::size_t>(b), static_cast<std::size_t>(e - b));
}

}  // namespace mcpet
