#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "mcpet/image.hpp"
#include "mcpet/motion.hpp"
#include "mcpet/projector.hpp"
#include "mcpet/simulate.hpp"

namespace mcpet {

//! f = int_0^1 W_t* A* 1 dt with the mask {f >= c_floor}.
struct SensitivityImage
{
    GridFunction values;
    std::vector<std::uint8_t> mask;
    double c_floor = 0.0;

    const GridGeometry& geometry() const { return values.geometry(); }
    std::size_t mask_size() const;
};

//! Wraps an explicit f; c_floor = c_floor_rel * max f. Throws if f has a negative value or is 0.
SensitivityImage make_sensitivity(GridFunction f, double c_floor_rel = 1e-6);

/*!
 * Time-invariant model: W* A* 1. Gated model with time-invariant gates:
 * sum of gate length times the gate operator. Otherwise composite midpoint
 * quadrature with n_time_samples nodes.
 */
SensitivityImage sensitivity(const MotionModel& model, const Projector& proj,
                             int n_time_samples = 64, double c_floor_rel = 1e-6);

struct KernelOptions
{
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    //! Warnings for dropped kernels go to stderr unless false.
    bool warn = true;
};

/*!
 * The event kernels gamma = W_t* a_i restricted to the sensitivity mask.
 *
 * Events sharing a detector and a motion state share one kernel, stored with
 * its multiplicity; kernels are ordered by detector, then motion state, then
 * first occurrence. Kernels that vanish on the mask are dropped. If the
 * stored kernels would exceed the memory budget, only their descriptors are
 * kept and each kernel is rebuilt on access.
 */
class KernelSet
{
  public:
    //! Explicit kernels, each with multiplicity 1 unless given.
    KernelSet(const GridGeometry& geom, std::vector<SparseFunction> kernels,
              std::vector<double> multiplicity = {});

    static KernelSet build(const ListModeData& data, const MotionModel& model,
                           const Projector& proj, const SensitivityImage& f,
                           const KernelOptions& options = {});

    const GridGeometry& geometry() const { return geom_; }
    std::size_t size() const { return multiplicity_.size(); }
    double multiplicity(std::size_t k) const { return multiplicity_[k]; }
    //! Retained events (sum of multiplicities).
    double n() const { return n_; }
    std::size_t dropped() const { return dropped_; }
    bool stored() const { return stored_; }
    std::size_t stored_bytes() const;

    //! Kernel k; in recompute mode the result lives in `scratch`.
    const SparseFunction& kernel(std::size_t k, SparseFunction& scratch) const;

    template <class F>
    void for_each(F&& f) const
    {
        SparseFunction scratch;
        for (std::size_t k = 0; k < size(); ++k)
            f(k, kernel(k, scratch), multiplicity_[k]);
    }

  private:
    struct Source;
    KernelSet(const GridGeometry& geom) : geom_(geom) {}

    GridGeometry geom_;
    std::vector<double> multiplicity_;
    double n_ = 0.0;
    std::size_t dropped_ = 0;
    bool stored_ = true;
    std::vector<SparseFunction> kernels_;
    // Recompute mode: detector and one representative time per kernel.
    std::shared_ptr<const Source> source_;
    std::vector<std::uint32_t> detector_;
    std::vector<double> time_;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

//! <mu, f> - sum_gamma m log <mu, gamma>; +inf outside dom.
double loss(const DensityImage& mu, const SensitivityImage& f, const KernelSet& kernels);

//! f - sum_gamma m gamma / <mu, gamma>; throws DomainViolation outside dom.
GridFunction loss_gradient(const DensityImage& mu, const SensitivityImage& f,
                           const KernelSet& kernels);

//! One motion-aware ML-EM update; zero outside the mask.
DensityImage mlem_step(const DensityImage& mu, const SensitivityImage& f, const KernelSet& kernels);

//! Uniform on the mask with <mu0, f> = n (n = 0 gives the zero image).
DensityImage uniform_start(const SensitivityImage& f, double n);

struct KktResidual
{
    double min_grad = 0.0;
    double supp_grad_max = 0.0;
};

//! min over the mask of grad loss, and max |grad loss| where mu > 1e-10 max mu.
KktResidual kkt_residual(const DensityImage& mu, const SensitivityImage& f,
                         const KernelSet& kernels);

//! D(f mu_k1 || f mu_k) = kl_images of the products.
double surrogate_gap(const DensityImage& mu_k, const DensityImage& mu_k1,
                     const SensitivityImage& f);

//! Union of {gamma > eps}.
std::vector<std::uint8_t> support_union(const KernelSet& kernels, double eps = 0.0);

struct ReconState
{
    DensityImage mu;
    int k = 0;
    std::vector<double> loss_history;
    std::vector<double> mass_history;
    //! gap_history[k] = surrogate_gap(mu_k, mu_{k+1}).
    std::vector<double> gap_history;
    std::vector<KktResidual> kkt_history;
};

struct RunOptions
{
    //! Throw InvariantViolation on a failed monotone-loss, mass or sandwich check.
    bool check_invariants = true;
    double loss_tol = 1e-9;
    double mass_tol = 1e-9;
    double gap_tol = 1e-8;
};

/*!
 * k_star ML-EM iterations from mu0. Histories have k_star + 1 entries
 * (gap_history has k_star).
 */
ReconState mlem_run(const DensityImage& mu0, const SensitivityImage& f, const KernelSet& kernels,
                    int k_star, const RunOptions& options = {});

//! mu A*(y / A mu) / A*1 on {A*1 >= c_floor_rel max A*1}.
DensityImage classical_mlem_step(const DensityImage& mu, const Sinogram& y, const Projector& proj,
                                 double c_floor_rel = 1e-6);

/*!
 * Gated ML-EM with A_s = A W_{t_s}:
 * mu / (sum_s dt_s A_s* 1) * sum_s A_s* (n^s / A_s mu).
 * The model must be piecewise constant with time-invariant gates.
 */
DensityImage gated_mlem_step(const DensityImage& mu, const std::vector<Sinogram>& gated_counts,
                             const MotionModel& model, const Projector& proj,
                             double c_floor_rel = 1e-6);

/*!
 * k_star iterations of classical_mlem_step from mu0, recording the binned
 * loss <mu, A*1> - sum_i y_i log (A mu)_i and the other histories.
 */
ReconState classical_mlem_run(const DensityImage& mu0, const Sinogram& y, const Projector& proj,
                              int k_star, double c_floor_rel = 1e-6);

//! k_star iterations of gated_mlem_step, with histories as for mlem_run.
ReconState gated_mlem_run(const DensityImage& mu0, const std::vector<Sinogram>& gated_counts,
                          const MotionModel& model, const Projector& proj, int k_star,
                          double c_floor_rel = 1e-6);

//! Per-gate counts n^s using the gate intervals of a piecewise model.
std::vector<Sinogram> gate_counts(const ListModeData& data, const MotionModel& model,
                                  const ProjectorConfig& config);

}  // namespace mcpet
