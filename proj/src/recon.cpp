#include "mcpet/recon.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <tuple>

#include "mcpet/divergence.hpp"
#include "mcpet/errors.hpp"

namespace mcpet {

// ---------------------------------------------------------------------------
// Sensitivity

std::size_t SensitivityImage::mask_size() const
{
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

SensitivityImage make_sensitivity(GridFunction f, double c_floor_rel)
{
    if (!(c_floor_rel > 0.0 && c_floor_rel < 1.0))
        throw InvalidArgument("c_floor_rel must lie in (0, 1)");
    double fmax = 0.0;
    for (double v : f.values()) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidArgument("sensitivity values must be finite and >= 0");
        fmax = std::max(fmax, v);
    }
    if (fmax == 0.0)
        throw InvariantViolation("sensitivity f vanishes identically; no pixel can be estimated");
    SensitivityImage s{std::move(f), {}, c_floor_rel * fmax};
    s.mask.resize(s.values.size());
    for (std::size_t p = 0; p < s.mask.size(); ++p)
        s.mask[p] = s.values[p] >= s.c_floor ? 1 : 0;
    return s;
}

SensitivityImage sensitivity(const MotionModel& model, const Projector& proj, int n_time_samples,
                             double c_floor_rel)
{
    if (n_time_samples < 1)
        throw InvalidArgument("sensitivity: n_time_samples must be >= 1");
    const GridFunction a1 = proj.adjoint_ones();
    if (model.is_time_invariant())
        return make_sensitivity(adjoint_apply(model.warp_at(0.0), a1), c_floor_rel);

    GridFunction f(proj.geometry());
    auto add = [&](const Warp& w, double weight) {
        const GridFunction g = adjoint_apply(w, a1);
        for (std::size_t p = 0; p < f.size(); ++p)
            f[p] += weight * g[p];
    };
    if (model.is_piecewise_invariant()) {
        const auto& pw = std::get<PiecewiseMotion>(model.variant());
        for (std::size_t s = 0; s + 1 < pw.times.size(); ++s)
            add(model.warp_at(pw.times[s]), pw.times[s + 1] - pw.times[s]);
    } else {
        for (int k = 0; k < n_time_samples; ++k)
            add(model.warp_at((k + 0.5) / n_time_samples), 1.0 / n_time_samples);
    }
    return make_sensitivity(std::move(f), c_floor_rel);
}

// ---------------------------------------------------------------------------
// Kernels

struct KernelSet::Source
{
    MotionModel model;
    Projector proj;
    ProjectionIndex index;
};

KernelSet::KernelSet(const GridGeometry& geom, std::vector<SparseFunction> kernels,
                     std::vector<double> multiplicity)
    : geom_(geom), multiplicity_(std::move(multiplicity)), kernels_(std::move(kernels))
{
    if (multiplicity_.empty())
        multiplicity_.assign(kernels_.size(), 1.0);
    if (multiplicity_.size() != kernels_.size())
        throw InvalidArgument("KernelSet: one multiplicity per kernel required");
    for (std::size_t k = 0; k < kernels_.size(); ++k) {
        const auto& g = kernels_[k];
        if (g.index.size() != g.value.size())
            throw InvalidArgument("KernelSet: malformed sparse kernel");
        for (std::size_t e = 0; e < g.nnz(); ++e) {
            if (g.index[e] >= geom.size() || (e > 0 && g.index[e] <= g.index[e - 1]))
                throw InvalidArgument("KernelSet: kernel indices must be increasing and on the grid");
            if (!(g.value[e] >= 0.0) || !std::isfinite(g.value[e]))
                throw InvalidArgument("KernelSet: kernels must be finite and >= 0");
        }
        if (!(multiplicity_[k] > 0.0))
            throw InvalidArgument("KernelSet: multiplicities must be positive");
        n_ += multiplicity_[k];
    }
}

KernelSet KernelSet::build(const ListModeData& data, const MotionModel& model,
                           const Projector& proj, const SensitivityImage& f,
                           const KernelOptions& options)
{
    require_same_geometry(proj.geometry(), f.geometry(), "KernelSet::build");
    if (data.counts.size() != proj.detectors())
        throw GeometryMismatch("KernelSet::build: list-mode data and projector disagree on detector count");

    struct Slot
    {
        std::uint32_t detector;
        bool keyed;
        MotionStateKey key;
        std::size_t first;
        double time;
        double count;
    };
    std::vector<Slot> slots;
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>, std::size_t> lookup;
    for (std::size_t j = 0; j < data.events.size(); ++j) {
        const auto& e = data.events[j];
        const auto key = model.state_key(e.time);
        if (key) {
            const auto [it, fresh] = lookup.try_emplace({e.detector, key->gate, key->state}, slots.size());
            if (!fresh) {
                slots[it->second].count += 1.0;
                continue;
            }
        }
        slots.push_back({e.detector, key.has_value(), key.value_or(MotionStateKey{}), j, e.time, 1.0});
    }
    std::sort(slots.begin(), slots.end(), [](const Slot& l, const Slot& r) {
        return std::tie(l.detector, r.keyed, l.key, l.first)
               < std::tie(r.detector, l.keyed, r.key, r.first);
    });

    std::vector<std::uint32_t> mask_pixels;
    for (std::size_t p = 0; p < f.mask.size(); ++p) {
        if (f.mask[p])
            mask_pixels.push_back(static_cast<std::uint32_t>(p));
    }
    auto source = std::make_shared<Source>(Source{model, proj, ProjectionIndex(proj, std::move(mask_pixels))});

    KernelSet ks(proj.geometry());
    std::size_t bytes = 0;
    for (const auto& s : slots) {
        SparseFunction g = pull_back_profile(model.warp_at(s.time), proj, source->index, s.detector);
        if (g.empty()) {
            ks.dropped_ += static_cast<std::size_t>(s.count);
            if (options.warn)
                std::cerr << "warning: dropping " << s.count << " event(s) of detector " << s.detector
                          << " near t = " << s.time << ": kernel vanishes on the sensitivity mask\n";
            continue;
        }
        ks.multiplicity_.push_back(s.count);
        ks.detector_.push_back(s.detector);
        ks.time_.push_back(s.time);
        ks.n_ += s.count;
        if (ks.stored_) {
            bytes += g.nnz() * (sizeof(std::uint32_t) + sizeof(double));
            if (bytes > options.memory_budget_bytes) {
                ks.stored_ = false;
                ks.kernels_.clear();
                ks.kernels_.shrink_to_fit();
            } else {
                ks.kernels_.push_back(std::move(g));
            }
        }
    }
    if (ks.stored_) {
        ks.detector_.clear();
        ks.time_.clear();
    } else {
        ks.source_ = std::move(source);
    }
    return ks;
}

std::size_t KernelSet::stored_bytes() const
{
    std::size_t b = 0;
    for (const auto& g : kernels_)
        b += g.nnz() * (sizeof(std::uint32_t) + sizeof(double));
    return b;
}

const SparseFunction& KernelSet::kernel(std::size_t k, SparseFunction& scratch) const
{
    if (stored_)
        return kernels_[k];
    scratch = pull_back_profile(source_->model.warp_at(time_[k]), source_->proj, source_->index,
                                detector_[k]);
    return scratch;
}

// ---------------------------------------------------------------------------
// Objective and updates

namespace {

struct Pass
{
    std::vector<double> acc;  // sum_gamma m gamma / <mu, gamma>
    double log_sum = 0.0;     // sum_gamma m log <mu, gamma>
    bool in_domain = true;
    std::size_t offending = 0;
};

Pass accumulate(const DensityImage& mu, const KernelSet& kernels, bool want_acc)
{
    require_same_geometry(mu.geometry(), kernels.geometry(), "ML-EM");
    Pass out;
    if (want_acc)
        out.acc.assign(mu.size(), 0.0);
    const double area = mu.geometry().pixel_area();
    kernels.for_each([&](std::size_t k, const SparseFunction& g, double m) {
        if (!out.in_domain)
            return;
        const double inner = pairing(mu.values(), g, area);
        if (!(inner > 0.0)) {
            out.in_domain = false;
            out.offending = k;
            return;
        }
        out.log_sum += m * std::log(inner);
        if (want_acc) {
            const double w = m / inner;
            for (std::size_t e = 0; e < g.nnz(); ++e)
                out.acc[g.index[e]] += w * g.value[e];
        }
    });
    return out;
}

void require_domain(const Pass& pass, const char* where)
{
    if (!pass.in_domain)
        throw DomainViolation(std::string(where) + ": <mu, gamma> = 0 for kernel "
                                  + std::to_string(pass.offending) + "; mu is outside dom(loss)",
                              pass.offending);
}

double pairing_f(const DensityImage& mu, const SensitivityImage& f)
{
    return pairing(mu, f.values);
}

DensityImage update_from(const DensityImage& mu, const SensitivityImage& f, const std::vector<double>& acc)
{
    std::vector<double> out(mu.size(), 0.0);
    for (std::size_t p = 0; p < out.size(); ++p) {
        if (f.mask[p])
            out[p] = (mu[p] / f.values[p]) * acc[p];
    }
    return DensityImage(mu.geometry(), std::move(out));
}

GridFunction gradient_from(const SensitivityImage& f, const std::vector<double>& acc)
{
    GridFunction g(f.geometry());
    for (std::size_t p = 0; p < g.size(); ++p)
        g[p] = f.values[p] - acc[p];
    return g;
}

KktResidual kkt_from(const DensityImage& mu, const SensitivityImage& f, const GridFunction& grad)
{
    double mu_max = 0.0;
    for (double v : mu.values())
        mu_max = std::max(mu_max, v);
    const double eps = 1e-10 * mu_max;
    KktResidual r{kInfinity, 0.0};
    for (std::size_t p = 0; p < grad.size(); ++p) {
        if (f.mask[p])
            r.min_grad = std::min(r.min_grad, grad[p]);
        if (mu[p] > eps)
            r.supp_grad_max = std::max(r.supp_grad_max, std::abs(grad[p]));
    }
    return r;
}

}  // namespace

double loss(const DensityImage& mu, const SensitivityImage& f, const KernelSet& kernels)
{
    require_same_geometry(mu.geometry(), f.geometry(), "loss");
    const Pass pass = accumulate(mu, kernels, false);
    if (!pass.in_domain)
        return kInfinity;
    return pairing_f(mu, f) - pass.log_sum;
}

GridFunction loss_gradient(const DensityImage& mu, const SensitivityImage& f,
                           const KernelSet& kernels)
{
    require_same_geometry(mu.geometry(), f.geometry(), "loss_gradient");
    const Pass pass = accumulate(mu, kernels, true);
    require_domain(pass, "loss_gradient");
    return gradient_from(f, pass.acc);
}

DensityImage mlem_step(const DensityImage& mu, const SensitivityImage& f, const KernelSet& kernels)
{
    require_same_geometry(mu.geometry(), f.geometry(), "mlem_step");
    const Pass pass = accumulate(mu, kernels, true);
    require_domain(pass, "mlem_step");
    return update_from(mu, f, pass.acc);
}

DensityImage uniform_start(const SensitivityImage& f, double n)
{
    if (!(n >= 0.0))
        throw InvalidArgument("uniform_start: n must be >= 0");
    double acc = 0.0;
    for (std::size_t p = 0; p < f.mask.size(); ++p) {
        if (f.mask[p])
            acc += f.values[p];
    }
    const double c = n / (f.geometry().pixel_area() * acc);
    std::vector<double> v(f.mask.size(), 0.0);
    for (std::size_t p = 0; p < v.size(); ++p) {
        if (f.mask[p])
            v[p] = c;
    }
    return DensityImage(f.geometry(), std::move(v));
}

KktResidual kkt_residual(const DensityImage& mu, const SensitivityImage& f,
                         const KernelSet& kernels)
{
    const GridFunction grad = loss_gradient(mu, f, kernels);
    return kkt_from(mu, f, grad);
}

double surrogate_gap(const DensityImage& mu_k, const DensityImage& mu_k1, const SensitivityImage& f)
{
    require_same_geometry(mu_k.geometry(), f.geometry(), "surrogate_gap");
    require_same_geometry(mu_k1.geometry(), f.geometry(), "surrogate_gap");
    std::vector<double> a(f.values.size()), b(f.values.size());
    for (std::size_t p = 0; p < a.size(); ++p) {
        a[p] = f.values[p] * mu_k1[p];
        b[p] = f.values[p] * mu_k[p];
    }
    return kl_images(DensityImage(f.geometry(), std::move(a)), DensityImage(f.geometry(), std::move(b)));
}

std::vector<std::uint8_t> support_union(const KernelSet& kernels, double eps)
{
    std::vector<std::uint8_t> mask(kernels.geometry().size(), 0);
    kernels.for_each([&](std::size_t, const SparseFunction& g, double) {
        for (std::size_t e = 0; e < g.nnz(); ++e) {
            if (g.value[e] > eps)
                mask[g.index[e]] = 1;
        }
    });
    return mask;
}

ReconState mlem_run(const DensityImage& mu0, const SensitivityImage& f, const KernelSet& kernels,
                    int k_star, const RunOptions& options)
{
    if (k_star < 0)
        throw InvalidArgument("mlem_run: k_star must be >= 0");
    require_same_geometry(mu0.geometry(), f.geometry(), "mlem_run");
    for (std::size_t p = 0; p < mu0.size(); ++p) {
        if (f.mask[p] && !(mu0[p] > 0.0))
            throw InvalidArgument("mlem_run: mu0 must be strictly positive on the sensitivity mask");
    }

    ReconState st{mu0, 0, {}, {}, {}, {}};
    const double n = kernels.n();
    for (int k = 0;; ++k) {
        const Pass pass = accumulate(st.mu, kernels, true);
        require_domain(pass, "mlem_run");
        const double mass = pairing_f(st.mu, f);
        st.loss_history.push_back(mass - pass.log_sum);
        st.mass_history.push_back(mass);
        st.kkt_history.push_back(kkt_from(st.mu, f, gradient_from(f, pass.acc)));
        if (k == k_star)
            break;
        DensityImage next = update_from(st.mu, f, pass.acc);
        st.gap_history.push_back(surrogate_gap(st.mu, next, f));
        st.mu = std::move(next);
        st.k = k + 1;
    }

    if (options.check_invariants) {
        const double scale = std::abs(st.loss_history.front());
        for (int k = 0; k < k_star; ++k) {
            const double drop = st.loss_history[k] - st.loss_history[k + 1];
            if (drop < -options.loss_tol * scale)
                throw InvariantViolation("loss increased at iteration " + std::to_string(k + 1));
            const double gap = st.gap_history[k];
            if (!(gap >= 0.0) || gap > drop + options.gap_tol * scale)
                throw InvariantViolation("surrogate gap outside [0, loss decrease] at iteration "
                                         + std::to_string(k));
            if (std::abs(st.mass_history[k + 1] - n) > options.mass_tol * n)
                throw InvariantViolation("<mu_k, f> != n at iteration " + std::to_string(k + 1));
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Binned variants

namespace {

// One gate of a binned problem: counts observed through A W for a fixed warp.
struct BinnedGate
{
    Warp warp;
    const Sinogram* counts;
};

struct BinnedPass
{
    std::vector<double> numer;  // sum_s W_s* A* (n^s / A_s mu)
    double log_sum = 0.0;       // sum_s sum_i n^s_i log (A_s mu)_i
};

BinnedPass binned_pass(const DensityImage& mu, const std::vector<BinnedGate>& gates,
                       const Projector& proj, const char* where)
{
    const auto& geom = proj.geometry();
    BinnedPass out;
    out.numer.assign(geom.size(), 0.0);
    std::vector<std::uint32_t> all;
    std::vector<double> moved;
    std::vector<double> fwd(proj.detectors()), ratio(proj.detectors()), back(geom.size());
    for (std::size_t s = 0; s < gates.size(); ++s) {
        const Sinogram& y = *gates[s].counts;
        require_same_layout(proj, y, where);
        const Warp& w = gates[s].warp;
        if (w.kind() == Warp::Kind::identity) {
            proj.forward(mu.values(), fwd);
        } else {
            if (all.empty()) {
                all.resize(geom.size());
                for (std::size_t p = 0; p < all.size(); ++p)
                    all[p] = static_cast<std::uint32_t>(p);
                moved.resize(geom.size());
            }
            pull_back_transpose(w, geom, all, mu.values(), moved);
            proj.forward(moved, fwd);
        }
        for (std::size_t i = 0; i < ratio.size(); ++i) {
            ratio[i] = 0.0;
            if (y[i] == 0.0)
                continue;
            if (!(fwd[i] > 0.0))
                throw DomainViolation(std::string(where) + ": gate " + std::to_string(s)
                                          + ", detector " + std::to_string(i)
                                          + " has counts but the expected count is 0", i);
            ratio[i] = y[i] / fwd[i];
            out.log_sum += y[i] * std::log(fwd[i]);
        }
        proj.adjoint(ratio, back);
        if (w.kind() == Warp::Kind::identity) {
            for (std::size_t p = 0; p < back.size(); ++p)
                out.numer[p] += back[p];
        } else {
            const GridFunction pulled = adjoint_apply(w, GridFunction(geom, back));
            for (std::size_t p = 0; p < back.size(); ++p)
                out.numer[p] += pulled[p];
        }
    }
    return out;
}

std::vector<BinnedGate> gated_problem(const std::vector<Sinogram>& gated_counts,
                                      const MotionModel& model, const char* where)
{
    if (!model.is_piecewise_invariant())
        throw InvalidArgument(std::string(where) + ": model must be gated with time-invariant gates");
    const auto& pw = std::get<PiecewiseMotion>(model.variant());
    if (gated_counts.size() != pw.models.size())
        throw InvalidArgument(std::string(where) + ": one sinogram per gate required");
    std::vector<BinnedGate> gates;
    for (std::size_t s = 0; s < gated_counts.size(); ++s)
        gates.push_back({model.warp_at(pw.times[s]), &gated_counts[s]});
    return gates;
}

ReconState binned_run(const DensityImage& mu0, const std::vector<BinnedGate>& gates,
                      const SensitivityImage& f, const Projector& proj, int k_star,
                      const char* where)
{
    if (k_star < 0)
        throw InvalidArgument(std::string(where) + ": k_star must be >= 0");
    require_same_geometry(mu0.geometry(), proj.geometry(), where);
    ReconState st{mu0, 0, {}, {}, {}, {}};
    for (int k = 0;; ++k) {
        const BinnedPass pass = binned_pass(st.mu, gates, proj, where);
        const double mass = pairing_f(st.mu, f);
        st.loss_history.push_back(mass - pass.log_sum);
        st.mass_history.push_back(mass);
        st.kkt_history.push_back(kkt_from(st.mu, f, gradient_from(f, pass.numer)));
        if (k == k_star)
            break;
        DensityImage next = update_from(st.mu, f, pass.numer);
        st.gap_history.push_back(surrogate_gap(st.mu, next, f));
        st.mu = std::move(next);
        st.k = k + 1;
    }
    return st;
}

}  // namespace

DensityImage classical_mlem_step(const DensityImage& mu, const Sinogram& y, const Projector& proj,
                                 double c_floor_rel)
{
    require_same_geometry(mu.geometry(), proj.geometry(), "classical_mlem_step");
    require_same_layout(proj, y, "classical_mlem_step");
    const SensitivityImage f = make_sensitivity(proj.adjoint_ones(), c_floor_rel);
    std::vector<double> fwd(proj.detectors());
    proj.forward(mu.values(), fwd);
    std::vector<double> ratio(proj.detectors(), 0.0);
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        if (y[i] == 0.0)
            continue;
        if (!(fwd[i] > 0.0))
            throw DomainViolation("classical_mlem_step: detector " + std::to_string(i)
                                      + " has counts but (A mu)_i = 0", i);
        ratio[i] = y[i] / fwd[i];
    }
    std::vector<double> back(mu.size());
    proj.adjoint(ratio, back);
    return update_from(mu, f, back);
}

DensityImage gated_mlem_step(const DensityImage& mu, const std::vector<Sinogram>& gated_counts,
                             const MotionModel& model, const Projector& proj, double c_floor_rel)
{
    require_same_geometry(mu.geometry(), proj.geometry(), "gated_mlem_step");
    const auto gates = gated_problem(gated_counts, model, "gated_mlem_step");
    const SensitivityImage f = sensitivity(model, proj, 1, c_floor_rel);
    return update_from(mu, f, binned_pass(mu, gates, proj, "gated_mlem_step").numer);
}

ReconState classical_mlem_run(const DensityImage& mu0, const Sinogram& y, const Projector& proj,
                              int k_star, double c_floor_rel)
{
    const SensitivityImage f = make_sensitivity(proj.adjoint_ones(), c_floor_rel);
    // Same arithmetic as iterating classical_mlem_step, plus the histories.
    return binned_run(mu0, {{Warp::identity(), &y}}, f, proj, k_star, "classical_mlem_run");
}

ReconState gated_mlem_run(const DensityImage& mu0, const std::vector<Sinogram>& gated_counts,
                          const MotionModel& model, const Projector& proj, int k_star,
                          double c_floor_rel)
{
    const auto gates = gated_problem(gated_counts, model, "gated_mlem_run");
    return binned_run(mu0, gates, sensitivity(model, proj, 1, c_floor_rel), proj, k_star,
                      "gated_mlem_run");
}

std::vector<Sinogram> gate_counts(const ListModeData& data, const MotionModel& model,
                                  const ProjectorConfig& config)
{
    const auto* pw = std::get_if<PiecewiseMotion>(&model.variant());
    if (!pw)
        throw InvalidArgument("gate_counts: model is not gated");
    std::vector<Sinogram> out;
    for (std::size_t s = 0; s + 1 < pw->times.size(); ++s)
        out.push_back(aggregate(data, config, pw->times[s], pw->times[s + 1]));
    return out;
}

}  // namespace mcpet
