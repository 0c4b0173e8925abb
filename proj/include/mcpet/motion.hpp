#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mcpet/image.hpp"
#include "mcpet/projector.hpp"

namespace mcpet {

//! Stationary velocity field sampled at pixel centres (units per unit time).
struct VelocityField
{
    GridGeometry geom;
    std::vector<double> vx;
    std::vector<double> vy;

    VelocityField(GridGeometry g, std::vector<double> x, std::vector<double> y);
    static VelocityField zero(const GridGeometry& g);

    //! Bilinear sample; the query point is clamped to the grid of centres.
    Vec2 at(Vec2 p) const;
    double sup_norm() const;
    VelocityField scaled(double s) const;
    VelocityField plus(const VelocityField& other, double weight) const;
};

//! Per-pixel image of the pixel centres under a map phi.
struct DiffeoMap
{
    GridGeometry geom;
    std::vector<double> map_x;
    std::vector<double> map_y;

    Vec2 operator()(std::size_t pixel) const { return {map_x[pixel], map_y[pixel]}; }
};

/*!
 * phi_t = exp(t v): classical fourth-order Runge-Kutta with `steps`
 * uniform steps of size t / steps, applied to every pixel centre.
 */
DiffeoMap integrate_flow(const VelocityField& v, double t, int steps);

//! phi_t^{-1}, computed as the flow of -v.
DiffeoMap inverse_flow(const VelocityField& v, double t, int steps);

//! Central-difference Jacobian determinant (one-sided on the border).
GridFunction jacobian_det(const DiffeoMap& map);

/*!
 * Flow trajectories of every pixel centre tabulated at t_k = k / nodes,
 * with the velocity at each node. phi_t at intermediate times is the cubic
 * Hermite interpolant of the two surrounding nodes.
 */
class FlowTable
{
  public:
    FlowTable(const VelocityField& v, int steps, int nodes = 64);

    Vec2 eval(std::size_t pixel, double t) const;
    //! Bound on |phi_t(x) - x| over all pixels and t in [0, 1].
    double max_displacement() const { return max_displacement_; }
    int nodes() const { return nodes_; }

    struct Cursor
    {
        std::size_t node = 0;
        double h00 = 1.0, h10 = 0.0, h01 = 0.0, h11 = 0.0;
    };
    Cursor cursor(double t) const;
    Vec2 eval(std::size_t pixel, const Cursor& c) const;

  private:
    std::size_t pixels_;
    int nodes_;
    // Node-major: node k occupies [k * pixels_, (k + 1) * pixels_).
    std::vector<double> px_, py_, vx_, vy_;
    double max_displacement_ = 0.0;
};

struct StaticMotion
{
};

//! W_t* g(x) = g(x + c(t)), c(t) = ((a t + b) 1_{[0, stop]}(t), 0).
struct TranslationMotion
{
    double a = 0.0;
    double b = 0.0;
    double stop = 1.0;

    Vec2 offset(double t) const;
};

//! Mass-preserving action of phi_t = exp(t v): W_t* g = g o phi_t.
struct DiffeoMotion
{
    VelocityField velocity;
    int steps = 32;
    std::shared_ptr<const FlowTable> flow;
};

class MotionModel;

/*!
 * Gate s covers [times[s], times[s + 1]) (the last gate is closed) and
 * delegates to models[s] at the same t.
 */
struct PiecewiseMotion
{
    std::vector<double> times;
    std::vector<MotionModel> models;

    std::size_t gate(double t) const;
};

//! Key identifying W_t: equal keys imply identical operators.
struct MotionStateKey
{
    std::uint32_t gate = 0;
    std::uint64_t state = 0;
    auto operator<=>(const MotionStateKey&) const = default;
};

/*!
 * The pull-back x -> W_t* at one instant, as a point map on pixel centres.
 */
class Warp
{
  public:
    enum class Kind { identity, shift, flow };

    static Warp identity() { return Warp(Kind::identity, {}, nullptr, {}); }
    static Warp shift(Vec2 c) { return Warp(Kind::shift, c, nullptr, {}); }
    static Warp flow(const FlowTable& table, double t)
    {
        return Warp(Kind::flow, {}, &table, table.cursor(t));
    }

    Kind kind() const { return kind_; }
    //! Point at which W_t* g samples g for the pixel centred at `centre`.
    Vec2 map(std::size_t pixel, Vec2 centre) const
    {
        switch (kind_) {
        case Kind::identity: return centre;
        case Kind::shift: return centre + shift_;
        case Kind::flow: return table_->eval(pixel, cursor_);
        }
        return centre;
    }
    //! Uniform part of the displacement.
    Vec2 shift_part() const { return shift_; }
    //! Bound on the displacement beyond shift_part().
    double residual_radius() const
    {
        return kind_ == Kind::flow ? table_->max_displacement() : 0.0;
    }

  private:
    Warp(Kind k, Vec2 s, const FlowTable* t, FlowTable::Cursor c)
        : kind_(k), shift_(s), table_(t), cursor_(c)
    {
    }
    Kind kind_;
    Vec2 shift_;
    const FlowTable* table_;
    FlowTable::Cursor cursor_;
};

/*!
 * Time-indexed motion operators W_t, t in [0, 1].
 *
 * Copies are cheap: the diffeomorphism flow table is shared and immutable.
 */
class MotionModel
{
  public:
    using Variant = std::variant<StaticMotion, TranslationMotion, DiffeoMotion, PiecewiseMotion>;

    MotionModel() : v_(StaticMotion{}) {}

    static MotionModel static_model() { return MotionModel(); }
    static MotionModel translation(double a, double b, double stop);
    //! Throws unless v vanishes at every pixel centred outside the FOV disk.
    static MotionModel diffeo(VelocityField v, int steps = 32);
    //! Gate times strictly increasing from 0 to 1; no nested gating.
    static MotionModel piecewise(std::vector<double> times, std::vector<MotionModel> models);

    const Variant& variant() const { return v_; }

    Warp warp_at(double t) const;
    //! W_t does not depend on t.
    bool is_time_invariant() const;
    //! Gated with every gate time-invariant.
    bool is_piecewise_invariant() const;
    std::optional<MotionStateKey> state_key(double t) const;

  private:
    explicit MotionModel(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

void check_time(double t, const char* where);

//! x -> g(phi(x)) by bilinear interpolation, zero outside the grid.
GridFunction adjoint_apply(const MotionModel& model, double t, const GridFunction& g);
GridFunction adjoint_apply(const Warp& warp, const GridFunction& g);

/*!
 * Density of W_t mu. Static: mu. Translation: x -> mu(x - c(t)).
 * Diffeomorphism: x -> |D phi_t^{-1}(x)| mu(phi_t^{-1}(x)) with phi_t^{-1}
 * from inverse_flow, averaged over 8 x 8 points per pixel. Dual to
 * adjoint_apply up to interpolation error.
 */
DensityImage push_forward(const MotionModel& model, double t, const DensityImage& mu);

/*!
 * Exact discrete transpose of adjoint_apply: pairing(result, g) equals
 * pairing(mu, adjoint_apply(model, t, g)) for every g, up to rounding.
 */
DensityImage pull_back_transpose(const MotionModel& model, double t, const DensityImage& mu);
void pull_back_transpose(const Warp& warp, const GridGeometry& geom,
                         std::span<const std::uint32_t> pixels, std::span<const double> mu,
                         std::span<double> out);

/*!
 * W_t* a_i as a sparse function, evaluated on the pixels of `index` that
 * can reach detector i. Identity warps reproduce profile(i) bit for bit.
 */
SparseFunction pull_back_profile(const Warp& warp, const Projector& proj,
                                 const ProjectionIndex& index, std::size_t detector);

//! <mu, W_t* a_i> without materialising the kernel.
double pull_back_pairing(const Warp& warp, const Projector& proj, const ProjectionIndex& index,
                         std::size_t detector, std::span<const double> mu);

//! Radial bump (1 - (r/R)^2)^2 on the FOV disk of radius R, zero outside.
double fov_bump(Vec2 p, double radius);

/*!
 * Rotation plus radial expansion damped by fov_bump:
 * v(x) = bump(x) (rotation * (-y, x) + expansion * (x, y)).
 */
VelocityField swirl_velocity(const GridGeometry& geom, double rotation, double expansion);

//! Smooth drift field bump(x) (1, 0), sup norm 1, used to corrupt a model.
VelocityField drift_perturbation(const GridGeometry& geom);

}  // namespace mcpet
