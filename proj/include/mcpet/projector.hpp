#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mcpet/image.hpp"

namespace mcpet {

/*!
 * Parallel-beam detector layout: n_angles views uniformly spaced in
 * [0, pi), each with n_tangential strips of width detector_width tiling
 * [-fov_radius, fov_radius]. Detector i = angle * n_tangential + tangential.
 */
struct ProjectorConfig
{
    std::size_t n_angles = 0;
    std::size_t n_tangential = 0;
    double fov_radius = 0.0;
    double detector_width = 0.0;

    //! FOV radius is half the shorter extent side.
    static ProjectorConfig for_geometry(std::size_t n_angles, std::size_t n_tangential,
                                        const GridGeometry& geom);

    std::size_t detectors() const { return n_angles * n_tangential; }
    double angle(std::size_t a) const;
    //! Lower edge of tangential bin j; bin j covers [edge(j), edge(j + 1)).
    double bin_edge(std::size_t j) const;

    friend bool operator==(const ProjectorConfig&, const ProjectorConfig&) = default;
};

//! Detector-indexed vector (counts y or expected counts A mu).
class Sinogram
{
  public:
    Sinogram(std::size_t n_angles, std::size_t n_tangential, double fill = 0.0);
    Sinogram(std::size_t n_angles, std::size_t n_tangential, std::vector<double> values);

    std::size_t n_angles() const { return n_angles_; }
    std::size_t n_tangential() const { return n_tangential_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    bool same_layout(const Sinogram& other) const
    {
        return n_angles_ == other.n_angles_ && n_tangential_ == other.n_tangential_;
    }

  private:
    std::size_t n_angles_;
    std::size_t n_tangential_;
    std::vector<double> values_;
};

/*!
 * The PET operator A, (A mu)_i = <mu, a_i>, and its adjoint
 * A* lambda = sum_i lambda_i a_i.
 *
 * Both directions read the same stored sparse profiles, so they are exact
 * transposes of each other. Copies share the immutable profile data.
 */
class Projector
{
  public:
    /*!
     * Strip-integral model: a_i(p) is the fraction of a 4x4 subsample grid
     * of pixel p whose tangential coordinate falls in strip i; zero for
     * pixels centred outside the FOV disk.
     */
    static Projector parallel_strip(const ProjectorConfig& config, const GridGeometry& geom);

    //! Arbitrary nonnegative profiles (small test problems).
    static Projector from_profiles(const GridGeometry& geom,
                                   const std::vector<GridFunction>& profiles);

    const GridGeometry& geometry() const;
    //! For explicit profiles: one "angle" with one bin per detector.
    const ProjectorConfig& config() const;
    std::size_t detectors() const;
    bool is_strip_model() const;

    const SparseFunction& profile(std::size_t i) const;
    //! a_i at one pixel, computed by the same routine that built profile(i).
    double profile_value(std::size_t i, std::size_t pixel) const;
    GridFunction detector_profile(std::size_t i) const;

    Sinogram make_sinogram(double fill = 0.0) const;

    Sinogram forward(const DensityImage& mu) const;
    void forward(std::span<const double> mu, std::span<double> out) const;
    GridFunction adjoint(const Sinogram& lambda) const;
    void adjoint(std::span<const double> lambda, std::span<double> out) const;
    //! A* 1.
    GridFunction adjoint_ones() const;

    //! Tangential unit normal and strip centre of detector i (strip model).
    Vec2 strip_normal(std::size_t i) const;
    double strip_center(std::size_t i) const;
    /*!
     * Largest distance, along the strip normal, between a point y and the
     * strip centre such that some bilinear corner pixel of y can have
     * a_i > 0.
     */
    double strip_reach() const;

    struct Data;

  private:
    explicit Projector(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
    std::shared_ptr<const Data> data_;
};

void require_same_layout(const Projector& proj, const Sinogram& s, const char* where);

/*!
 * Pixel subset sorted by tangential coordinate for every view.
 *
 * candidates() returns every pixel x of the subset for which x + shift can
 * lie within the strip reach of detector i, when the point may further move
 * by up to `radius`. A superset of the support of x -> a_i(x + d) for any
 * displacement |d - shift| <= radius. Explicit-profile projectors return the
 * whole subset.
 */
class ProjectionIndex
{
  public:
    ProjectionIndex(const Projector& proj, std::vector<std::uint32_t> pixels);
    //! Index over every pixel of the grid.
    explicit ProjectionIndex(const Projector& proj);

    std::span<const std::uint32_t> candidates(std::size_t i, Vec2 shift, double radius) const;
    std::span<const std::uint32_t> pixels() const { return pixels_; }

  private:
    Projector proj_;
    std::vector<std::uint32_t> pixels_;
    std::vector<std::vector<double>> sorted_coord_;
    std::vector<std::vector<std::uint32_t>> sorted_pixel_;
};

}  // namespace mcpet
