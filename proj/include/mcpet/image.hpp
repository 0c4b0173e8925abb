#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mcpet {

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
};

/*!
 * Regular 2D pixel grid over a physical rectangle.
 *
 * Pixels are stored row-major with y outer and x inner; pixel (ix, iy) is
 * centred at (x_min + (ix + 1/2) dx, y_min + (iy + 1/2) dy).
 */
class GridGeometry
{
  public:
    GridGeometry(std::size_t nx, std::size_t ny, double x_min, double x_max,
                 double y_min, double y_max);

    //! Square [-half_side, half_side]^2 with n x n pixels.
    static GridGeometry square(std::size_t n, double half_side);

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t size() const { return nx_ * ny_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    double pixel_area() const { return dx_ * dy_; }

    std::size_t index(std::size_t ix, std::size_t iy) const { return iy * nx_ + ix; }
    Vec2 center(std::size_t ix, std::size_t iy) const
    {
        return {x_min_ + (static_cast<double>(ix) + 0.5) * dx_,
                y_min_ + (static_cast<double>(iy) + 0.5) * dy_};
    }
    Vec2 center(std::size_t linear) const { return center(linear % nx_, linear / nx_); }

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

  private:
    std::size_t nx_;
    std::size_t ny_;
    double x_min_;
    double x_max_;
    double y_min_;
    double y_max_;
    double dx_;
    double dy_;
};

//! Per-pixel samples of a continuous function on the grid; any sign.
class GridFunction
{
  public:
    explicit GridFunction(GridGeometry geom, double fill = 0.0);
    GridFunction(GridGeometry geom, std::vector<double> values);

    const GridGeometry& geometry() const { return geom_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::size_t size() const { return values_.size(); }

  private:
    GridGeometry geom_;
    std::vector<double> values_;
};

/*!
 * Nonnegative measure discretised as a pixel density.
 *
 * Every value is finite and >= 0; the mass of pixel p is
 * values[p] * pixel_area.
 */
class DensityImage
{
  public:
    explicit DensityImage(GridGeometry geom, double fill = 0.0);
    //! Throws InvalidArgument on a negative or non-finite value.
    DensityImage(GridGeometry geom, std::vector<double> values);

    const GridGeometry& geometry() const { return geom_; }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    //! Move the samples out, leaving the image empty.
    std::vector<double> release() && { return std::move(values_); }

  private:
    GridGeometry geom_;
    std::vector<double> values_;
};

/*!
 * Grid function stored by its nonzero pixels, indices strictly increasing.
 */
struct SparseFunction
{
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t nnz() const { return index.size(); }
    bool empty() const { return index.empty(); }
};

void require_same_geometry(const GridGeometry& a, const GridGeometry& b,
                           const char* where);

//! <mu, g> by midpoint quadrature: pixel_area * sum mu(p) g(p).
double pairing(const DensityImage& mu, const GridFunction& g);
double pairing(const DensityImage& mu, const SparseFunction& g);
double pairing(std::span<const double> mu, const SparseFunction& g,
               double pixel_area);

double total_mass(const DensityImage& mu);

GridFunction to_dense(const SparseFunction& s, const GridGeometry& geom);
SparseFunction to_sparse(const GridFunction& g);

/*!
 * Bilinear interpolation stencil at a physical point.
 *
 * Corners that fall outside the grid get index -1 and contribute zero, so
 * sampling extends the function by zero beyond the outermost pixel
 * centres (fading over half a pixel).
 */
struct BilinearStencil
{
    std::array<std::int64_t, 4> index;
    std::array<double, 4> weight;
};

BilinearStencil bilinear_stencil(const GridGeometry& geom, Vec2 point);

double sample_bilinear(const GridGeometry& geom, std::span<const double> values,
                       Vec2 point);

}  // namespace mcpet
