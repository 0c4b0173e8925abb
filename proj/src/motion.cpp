#include "mcpet/motion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "mcpet/errors.hpp"

namespace mcpet {

// ---------------------------------------------------------------------------
// VelocityField

VelocityField::VelocityField(GridGeometry g, std::vector<double> x, std::vector<double> y)
    : geom(g), vx(std::move(x)), vy(std::move(y))
{
    if (vx.size() != geom.size() || vy.size() != geom.size())
        throw GeometryMismatch("velocity field planes do not match the grid");
    for (std::size_t p = 0; p < vx.size(); ++p) {
        if (!std::isfinite(vx[p]) || !std::isfinite(vy[p]))
            throw InvalidArgument("velocity field must be finite");
    }
}

VelocityField VelocityField::zero(const GridGeometry& g)
{
    return VelocityField(g, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0));
}

namespace {

// Bilinear sample of two planes with the query clamped to the centre grid.
Vec2 clamped_bilinear(const GridGeometry& geom, const std::vector<double>& a,
                      const std::vector<double>& b, Vec2 p)
{
    const double u = std::clamp((p.x - geom.x_min()) / geom.dx() - 0.5, 0.0,
                                static_cast<double>(geom.nx() - 1));
    const double v = std::clamp((p.y - geom.y_min()) / geom.dy() - 0.5, 0.0,
                                static_cast<double>(geom.ny() - 1));
    const auto i0 = std::min(static_cast<std::size_t>(u), geom.nx() > 1 ? geom.nx() - 2 : 0);
    const auto j0 = std::min(static_cast<std::size_t>(v), geom.ny() > 1 ? geom.ny() - 2 : 0);
    const std::size_t i1 = std::min(i0 + 1, geom.nx() - 1);
    const std::size_t j1 = std::min(j0 + 1, geom.ny() - 1);
    const double wu = u - static_cast<double>(i0);
    const double wv = v - static_cast<double>(j0);
    const std::size_t p00 = geom.index(i0, j0), p10 = geom.index(i1, j0);
    const std::size_t p01 = geom.index(i0, j1), p11 = geom.index(i1, j1);
    const double w00 = (1 - wu) * (1 - wv), w10 = wu * (1 - wv), w01 = (1 - wu) * wv, w11 = wu * wv;
    return {w00 * a[p00] + w10 * a[p10] + w01 * a[p01] + w11 * a[p11],
            w00 * b[p00] + w10 * b[p10] + w01 * b[p01] + w11 * b[p11]};
}

// Value of the pixel containing p; zero outside the grid.
double sample_constant(const GridGeometry& geom, std::span<const double> values, Vec2 p)
{
    const double u = std::floor((p.x - geom.x_min()) / geom.dx());
    const double v = std::floor((p.y - geom.y_min()) / geom.dy());
    if (!(u >= 0.0 && v >= 0.0 && u < static_cast<double>(geom.nx())
          && v < static_cast<double>(geom.ny())))
        return 0.0;
    return values[geom.index(static_cast<std::size_t>(u), static_cast<std::size_t>(v))];
}

}  // namespace

Vec2 VelocityField::at(Vec2 p) const { return clamped_bilinear(geom, vx, vy, p); }

double VelocityField::sup_norm() const
{
    double m = 0.0;
    for (std::size_t p = 0; p < vx.size(); ++p)
        m = std::max(m, std::hypot(vx[p], vy[p]));
    return m;
}

VelocityField VelocityField::scaled(double s) const
{
    auto out = *this;
    for (auto& x : out.vx) x *= s;
    for (auto& y : out.vy) y *= s;
    return out;
}

VelocityField VelocityField::plus(const VelocityField& other, double weight) const
{
    require_same_geometry(geom, other.geom, "VelocityField::plus");
    auto out = *this;
    for (std::size_t p = 0; p < vx.size(); ++p) {
        out.vx[p] += weight * other.vx[p];
        out.vy[p] += weight * other.vy[p];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flows

namespace {

Vec2 rk4_step(const VelocityField& v, Vec2 x, double h)
{
    const Vec2 k1 = v.at(x);
    const Vec2 k2 = v.at(x + (0.5 * h) * k1);
    const Vec2 k3 = v.at(x + (0.5 * h) * k2);
    const Vec2 k4 = v.at(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

DiffeoMap integrate_flow(const VelocityField& v, double t, int steps)
{
    if (steps < 1)
        throw InvalidArgument("integrate_flow: steps must be >= 1");
    check_time(t, "integrate_flow");
    const auto& g = v.geom;
    DiffeoMap m{g, std::vector<double>(g.size()), std::vector<double>(g.size())};
    const double h = t / steps;
    for (std::size_t p = 0; p < g.size(); ++p) {
        Vec2 x = g.center(p);
        if (t > 0.0) {
            for (int s = 0; s < steps; ++s)
                x = rk4_step(v, x, h);
        }
        m.map_x[p] = x.x;
        m.map_y[p] = x.y;
    }
    return m;
}

DiffeoMap inverse_flow(const VelocityField& v, double t, int steps)
{
    return integrate_flow(v.scaled(-1.0), t, steps);
}

GridFunction jacobian_det(const DiffeoMap& map)
{
    const auto& g = map.geom;
    GridFunction out(g);
    const std::size_t nx = g.nx(), ny = g.ny();
    auto diff = [&](const std::vector<double>& f, std::size_t ix, std::size_t iy, bool along_x) {
        const std::size_t n = along_x ? nx : ny;
        const std::size_t k = along_x ? ix : iy;
        if (n == 1)
            return along_x ? 1.0 : 0.0;  // degenerate axis: treat the map as identity there
        const double h = along_x ? g.dx() : g.dy();
        auto at = [&](std::size_t kk) {
            return along_x ? f[g.index(kk, iy)] : f[g.index(ix, kk)];
        };
        if (k == 0)
            return (at(1) - at(0)) / h;
        if (k == n - 1)
            return (at(n - 1) - at(n - 2)) / h;
        return (at(k + 1) - at(k - 1)) / (2.0 * h);
    };
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            double dxx = diff(map.map_x, ix, iy, true);
            double dyy = diff(map.map_y, ix, iy, false);
            double dxy = diff(map.map_x, ix, iy, false);
            double dyx = diff(map.map_y, ix, iy, true);
            if (ny == 1) { dyy = 1.0; dxy = 0.0; }
            if (nx == 1) { dxx = 1.0; dyx = 0.0; }
            out[g.index(ix, iy)] = dxx * dyy - dxy * dyx;
        }
    }
    return out;
}

FlowTable::FlowTable(const VelocityField& v, int steps, int nodes)
    : pixels_(v.geom.size()), nodes_(nodes)
{
    if (steps < 1 || nodes < 1)
        throw InvalidArgument("FlowTable: steps and nodes must be >= 1");
    const std::size_t total = pixels_ * static_cast<std::size_t>(nodes + 1);
    px_.resize(total);
    py_.resize(total);
    vx_.resize(total);
    vy_.resize(total);
    // Node spacing 1/nodes, refined so no step is longer than 1/steps.
    const int sub = std::max(1, (steps + nodes - 1) / nodes);
    const double h = 1.0 / (static_cast<double>(nodes) * sub);
    double vmax = 0.0;
    for (std::size_t p = 0; p < pixels_; ++p) {
        const Vec2 x0 = v.geom.center(p);
        Vec2 x = x0;
        for (int k = 0; k <= nodes; ++k) {
            if (k > 0) {
                for (int s = 0; s < sub; ++s)
                    x = rk4_step(v, x, h);
            }
            const Vec2 vel = v.at(x);
            const std::size_t o = static_cast<std::size_t>(k) * pixels_ + p;
            px_[o] = x.x;
            py_[o] = x.y;
            vx_[o] = vel.x;
            vy_[o] = vel.y;
            max_displacement_ = std::max(max_displacement_, std::hypot(x.x - x0.x, x.y - x0.y));
            vmax = std::max(vmax, std::hypot(vel.x, vel.y));
        }
    }
    // Between nodes the Hermite curve stays within one node interval of travel.
    max_displacement_ += vmax / nodes;
}

FlowTable::Cursor FlowTable::cursor(double t) const
{
    Cursor c;
    const double s_full = t * nodes_;
    auto k = static_cast<std::size_t>(std::floor(s_full));
    if (k >= static_cast<std::size_t>(nodes_))
        k = static_cast<std::size_t>(nodes_) - 1;
    const double s = s_full - static_cast<double>(k);
    const double s2 = s * s, s3 = s2 * s;
    const double h = 1.0 / nodes_;
    c.node = k;
    c.h00 = 2 * s3 - 3 * s2 + 1;
    c.h10 = (s3 - 2 * s2 + s) * h;
    c.h01 = -2 * s3 + 3 * s2;
    c.h11 = (s3 - s2) * h;
    return c;
}

Vec2 FlowTable::eval(std::size_t pixel, const Cursor& c) const
{
    const std::size_t a = c.node * pixels_ + pixel;
    const std::size_t b = a + pixels_;
    return {c.h00 * px_[a] + c.h10 * vx_[a] + c.h01 * px_[b] + c.h11 * vx_[b],
            c.h00 * py_[a] + c.h10 * vy_[a] + c.h01 * py_[b] + c.h11 * vy_[b]};
}

Vec2 FlowTable::eval(std::size_t pixel, double t) const
{
    return eval(pixel, cursor(t));
}

// ---------------------------------------------------------------------------
// Motion models

void check_time(double t, const char* where)
{
    if (!(t >= 0.0 && t <= 1.0))
        throw InvalidArgument(std::string(where) + ": time " + std::to_string(t)
                              + " outside [0, 1]");
}

Vec2 TranslationMotion::offset(double t) const
{
    return {t <= stop ? a * t + b : 0.0, 0.0};
}

std::size_t PiecewiseMotion::gate(double t) const
{
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    auto s = static_cast<std::size_t>(it - times.begin());
    s = s == 0 ? 0 : s - 1;
    return std::min(s, models.size() - 1);
}

MotionModel MotionModel::translation(double a, double b, double stop)
{
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(stop))
        throw InvalidArgument("translation parameters must be finite");
    return MotionModel(TranslationMotion{a, b, stop});
}

MotionModel MotionModel::diffeo(VelocityField v, int steps)
{
    if (steps < 1)
        throw InvalidArgument("diffeo: steps must be >= 1");
    const auto& g = v.geom;
    const double r = 0.5 * std::min(g.x_max() - g.x_min(), g.y_max() - g.y_min());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Vec2 c = g.center(p);
        if (c.x * c.x + c.y * c.y > r * r && (v.vx[p] != 0.0 || v.vy[p] != 0.0))
            throw InvalidArgument("diffeo: velocity field must vanish outside the FOV");
    }
    auto table = std::make_shared<const FlowTable>(v, steps);
    return MotionModel(DiffeoMotion{std::move(v), steps, std::move(table)});
}

MotionModel MotionModel::piecewise(std::vector<double> times, std::vector<MotionModel> models)
{
    if (times.size() < 2 || models.size() != times.size() - 1)
        throw InvalidArgument("piecewise: need N + 1 gate times for N models");
    if (times.front() != 0.0 || times.back() != 1.0)
        throw InvalidArgument("piecewise: gate times must start at 0 and end at 1");
    for (std::size_t s = 1; s < times.size(); ++s) {
        if (!(times[s] > times[s - 1]))
            throw InvalidArgument("piecewise: gate times must be strictly increasing");
    }
    for (const auto& m : models) {
        if (std::holds_alternative<PiecewiseMotion>(m.variant()))
            throw InvalidArgument("piecewise: nested gating is not supported");
    }
    return MotionModel(PiecewiseMotion{std::move(times), std::move(models)});
}

Warp MotionModel::warp_at(double t) const
{
    check_time(t, "motion");
    return std::visit(
        [t](const auto& m) -> Warp {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StaticMotion>) {
                return Warp::identity();
            } else if constexpr (std::is_same_v<T, TranslationMotion>) {
                const Vec2 c = m.offset(t);
                return c == Vec2{} ? Warp::identity() : Warp::shift(c);
            } else if constexpr (std::is_same_v<T, DiffeoMotion>) {
                return t == 0.0 ? Warp::identity() : Warp::flow(*m.flow, t);
            } else {
                return m.models[m.gate(t)].warp_at(t);
            }
        },
        v_);
}

bool MotionModel::is_time_invariant() const
{
    return std::visit(
        [](const auto& m) -> bool {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StaticMotion>) {
                return true;
            } else if constexpr (std::is_same_v<T, TranslationMotion>) {
                return m.a == 0.0 && (m.stop >= 1.0 || m.b == 0.0);
            } else if constexpr (std::is_same_v<T, DiffeoMotion>) {
                return false;
            } else {
                return m.models.size() == 1 && m.models.front().is_time_invariant();
            }
        },
        v_);
}

bool MotionModel::is_piecewise_invariant() const
{
    const auto* pw = std::get_if<PiecewiseMotion>(&v_);
    if (!pw)
        return false;
    return std::all_of(pw->models.begin(), pw->models.end(),
                       [](const MotionModel& m) { return m.is_time_invariant(); });
}

std::optional<MotionStateKey> MotionModel::state_key(double t) const
{
    check_time(t, "motion");
    return std::visit(
        [t](const auto& m) -> std::optional<MotionStateKey> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StaticMotion>) {
                return MotionStateKey{};
            } else if constexpr (std::is_same_v<T, TranslationMotion>) {
                const double c = m.offset(t).x + 0.0;  // folds -0 into +0
                return MotionStateKey{0, std::bit_cast<std::uint64_t>(c)};
            } else if constexpr (std::is_same_v<T, DiffeoMotion>) {
                if (t == 0.0)
                    return MotionStateKey{};
                return std::nullopt;
            } else {
                const std::size_t s = m.gate(t);
                auto inner = m.models[s].state_key(t);
                if (!inner)
                    return std::nullopt;
                return MotionStateKey{static_cast<std::uint32_t>(s), inner->state};
            }
        },
        v_);
}

// ---------------------------------------------------------------------------
// Operators

GridFunction adjoint_apply(const Warp& warp, const GridFunction& g)
{
    if (warp.kind() == Warp::Kind::identity)
        return g;
    const auto& geom = g.geometry();
    GridFunction out(geom);
    for (std::size_t p = 0; p < geom.size(); ++p)
        out[p] = sample_bilinear(geom, g.values(), warp.map(p, geom.center(p)));
    return out;
}

GridFunction adjoint_apply(const MotionModel& model, double t, const GridFunction& g)
{
    const Warp w = model.warp_at(t);
    if (const auto* d = std::get_if<DiffeoMotion>(&model.variant()))
        require_same_geometry(d->velocity.geom, g.geometry(), "adjoint_apply");
    return adjoint_apply(w, g);
}

void pull_back_transpose(const Warp& warp, const GridGeometry& geom,
                         std::span<const std::uint32_t> pixels, std::span<const double> mu,
                         std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto p : pixels) {
        const double m = mu[p];
        if (m == 0.0)
            continue;
        if (warp.kind() == Warp::Kind::identity) {
            out[p] += m;
            continue;
        }
        const auto st = bilinear_stencil(geom, warp.map(p, geom.center(p)));
        for (int c = 0; c < 4; ++c) {
            if (st.index[c] >= 0)
                out[static_cast<std::size_t>(st.index[c])] += st.weight[c] * m;
        }
    }
}

DensityImage pull_back_transpose(const MotionModel& model, double t, const DensityImage& mu)
{
    const auto& geom = mu.geometry();
    std::vector<std::uint32_t> all(geom.size());
    for (std::size_t p = 0; p < all.size(); ++p)
        all[p] = static_cast<std::uint32_t>(p);
    std::vector<double> out(geom.size());
    pull_back_transpose(model.warp_at(t), geom, all, mu.values(), out);
    return DensityImage(geom, std::move(out));
}

DensityImage push_forward(const MotionModel& model, double t, const DensityImage& mu)
{
    check_time(t, "push_forward");
    const auto& geom = mu.geometry();
    return std::visit(
        [&](const auto& m) -> DensityImage {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StaticMotion>) {
                return mu;
            } else if constexpr (std::is_same_v<T, TranslationMotion>) {
                const Vec2 c = m.offset(t);
                if (c == Vec2{})
                    return mu;
                std::vector<double> out(geom.size());
                for (std::size_t p = 0; p < geom.size(); ++p)
                    out[p] = sample_bilinear(geom, mu.values(), geom.center(p) - c);
                return DensityImage(geom, std::move(out));
            } else if constexpr (std::is_same_v<T, DiffeoMotion>) {
                require_same_geometry(m.velocity.geom, geom, "push_forward");
                if (t == 0.0)
                    return mu;
                // |D phi^{-1}| mu(phi^{-1}) integrated over each output pixel
                // with an 8 x 8 midpoint rule, mu read as constant per pixel.
                // The inverse map and its Jacobian are interpolated between
                // pixel centres.
                const DiffeoMap inv = inverse_flow(m.velocity, t, m.steps);
                const GridFunction jac = jacobian_det(inv);
                std::vector<double> dx(geom.size()), dy(geom.size()), ajac(geom.size());
                for (std::size_t p = 0; p < geom.size(); ++p) {
                    const Vec2 c = geom.center(p);
                    dx[p] = inv.map_x[p] - c.x;
                    dy[p] = inv.map_y[p] - c.y;
                    ajac[p] = std::abs(jac[p]);
                }
                constexpr int sub = 8;
                std::vector<double> out(geom.size());
                for (std::size_t p = 0; p < geom.size(); ++p) {
                    const Vec2 c = geom.center(p);
                    double acc = 0.0;
                    for (int sx = 0; sx < sub; ++sx) {
                        for (int sy = 0; sy < sub; ++sy) {
                            const Vec2 z{c.x + ((sx + 0.5) / sub - 0.5) * geom.dx(),
                                         c.y + ((sy + 0.5) / sub - 0.5) * geom.dy()};
                            const Vec2 d = clamped_bilinear(geom, dx, dy, z);
                            const double j = clamped_bilinear(geom, ajac, ajac, z).x;
                            acc += j * sample_constant(geom, mu.values(), z + d);
                        }
                    }
                    out[p] = acc / (sub * sub);
                }
                return DensityImage(geom, std::move(out));
            } else {
                return push_forward(m.models[m.gate(t)], t, mu);
            }
        },
        model.variant());
}

namespace {

// Calls sink(pixel, gamma) for every candidate pixel with gamma = W_t* a_i > 0.
template <class Sink>
void visit_pull_back(const Warp& warp, const Projector& proj, const ProjectionIndex& index,
                     std::size_t i, Sink&& sink)
{
    if (i >= proj.detectors())
        throw InvalidArgument("detector index " + std::to_string(i) + " out of range");
    const auto& geom = proj.geometry();
    const auto cand = index.candidates(i, warp.shift_part(), warp.residual_radius());
    if (warp.kind() == Warp::Kind::identity) {
        for (const auto p : cand) {
            const double v = proj.profile_value(i, p);
            if (v > 0.0)
                sink(p, v);
        }
        return;
    }
    const bool strip = proj.is_strip_model();
    const Vec2 n = strip ? proj.strip_normal(i) : Vec2{};
    const double centre = strip ? proj.strip_center(i) : 0.0;
    const double reach = strip ? proj.strip_reach() : 0.0;
    for (const auto p : cand) {
        const Vec2 y = warp.map(p, geom.center(p));
        if (strip && std::abs(y.x * n.x + y.y * n.y - centre) > reach)
            continue;
        const auto st = bilinear_stencil(geom, y);
        double v = 0.0;
        for (int c = 0; c < 4; ++c) {
            if (st.index[c] >= 0)
                v += st.weight[c] * proj.profile_value(i, static_cast<std::size_t>(st.index[c]));
        }
        if (v > 0.0)
            sink(p, v);
    }
}

}  // namespace

SparseFunction pull_back_profile(const Warp& warp, const Projector& proj,
                                 const ProjectionIndex& index, std::size_t detector)
{
    std::vector<std::pair<std::uint32_t, double>> entries;
    visit_pull_back(warp, proj, index, detector,
                    [&](std::uint32_t p, double v) { entries.emplace_back(p, v); });
    std::sort(entries.begin(), entries.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    SparseFunction out;
    out.index.reserve(entries.size());
    out.value.reserve(entries.size());
    for (const auto& [p, v] : entries) {
        out.index.push_back(p);
        out.value.push_back(v);
    }
    return out;
}

double pull_back_pairing(const Warp& warp, const Projector& proj, const ProjectionIndex& index,
                         std::size_t detector, std::span<const double> mu)
{
    double acc = 0.0;
    visit_pull_back(warp, proj, index, detector,
                    [&](std::uint32_t p, double v) { acc += mu[p] * v; });
    return proj.geometry().pixel_area() * acc;
}

// ---------------------------------------------------------------------------
// Fields

double fov_bump(Vec2 p, double radius)
{
    const double q = (p.x * p.x + p.y * p.y) / (radius * radius);
    if (q >= 1.0)
        return 0.0;
    return (1.0 - q) * (1.0 - q);
}

VelocityField swirl_velocity(const GridGeometry& geom, double rotation, double expansion)
{
    const double r = 0.5 * std::min(geom.x_max() - geom.x_min(), geom.y_max() - geom.y_min());
    auto v = VelocityField::zero(geom);
    for (std::size_t p = 0; p < geom.size(); ++p) {
        const Vec2 c = geom.center(p);
        const double b = fov_bump(c, r);
        v.vx[p] = b * (-rotation * c.y + expansion * c.x);
        v.vy[p] = b * (rotation * c.x + expansion * c.y);
    }
    return v;
}

VelocityField drift_perturbation(const GridGeometry& geom)
{
    const double r = 0.5 * std::min(geom.x_max() - geom.x_min(), geom.y_max() - geom.y_min());
    auto v = VelocityField::zero(geom);
    for (std::size_t p = 0; p < geom.size(); ++p)
        v.vx[p] = fov_bump(geom.center(p), r);
    const double s = v.sup_norm();
    return s > 0.0 ? v.scaled(1.0 / s) : v;
}

}  // namespace mcpet
