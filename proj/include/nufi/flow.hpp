#pragma once

#include "nufi/grid.hpp"
#include "nufi/poisson.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace nufi {

/// A phase-space point carried backward along a characteristic.
struct FlowState {
    Coords x{};
    Coords v{};
    double qm = -1.0; ///< charge-to-mass ratio of the species
};

struct WorkCounter {
    std::uint64_t verlet_micro_steps = 0;
    std::uint64_t f_evaluations = 0;

    WorkCounter& operator+=(const WorkCounter& o) noexcept {
        verlet_micro_steps += o.verlet_micro_steps;
        f_evaluations += o.f_evaluations;
        return *this;
    }
};

// ---------------------------------------------------------------------------
// boundaries

enum class LeftBoundary { periodic, open_inflow };
enum class RightBoundary { periodic, reflecting_wall };

struct BoundaryConfig {
    LeftBoundary left = LeftBoundary::periodic;
    RightBoundary right = RightBoundary::periodic;
    int max_reflections = 8; ///< wall crossings tolerated within one step

    bool is_periodic() const noexcept { return left == LeftBoundary::periodic; }
    void validate() const;
};

struct BoundaryOutcome {
    FlowState state;
    bool exited = false; ///< crossed the open boundary; state.v is the crossing velocity
    int reflections = 0;
};

/// Closes a backward position update. Periodic axes wrap; a trace that passes
/// the wall at x_max is reflected specularly; one that leaves through x_min
/// terminates (the caller samples the inflow distribution).
BoundaryOutcome apply_boundaries(const FlowState& state, const std::vector<AxisSpec>& spatial_axes,
                                 const BoundaryConfig& cfg);

// ---------------------------------------------------------------------------
// distribution sources

/// A distribution stored on a grid at some restart step (implemented by the
/// restart module).
class GridDistribution {
public:
    virtual ~GridDistribution() = default;
    virtual double eval(const Coords& x, const Coords& v) const = 0;
    virtual std::size_t step() const = 0;
    /// Largest |v| carrying non-negligible mass when the snapshot was built.
    virtual double velocity_support() const = 0;
};

/// What a backward trace ends on: f_0 or the newest snapshot.
class DistributionSource {
public:
    using Analytic = std::function<double(const Coords& x, const Coords& v)>;

    static DistributionSource analytic(Analytic f0,
                                       double velocity_support = std::numeric_limits<double>::infinity());
    static DistributionSource snapshot(std::shared_ptr<const GridDistribution> snap);

    bool is_analytic() const noexcept { return !snapshot_; }
    std::size_t base_step() const noexcept { return base_step_; }
    double velocity_support() const noexcept { return support_; }
    const std::shared_ptr<const GridDistribution>& grid_distribution() const noexcept { return snapshot_; }

    double operator()(const Coords& x, const Coords& v) const {
        return snapshot_ ? snapshot_->eval(x, v) : analytic_(x, v);
    }

private:
    Analytic analytic_;
    std::shared_ptr<const GridDistribution> snapshot_;
    std::size_t base_step_ = 0;
    double support_ = std::numeric_limits<double>::infinity();
};

/// Inflow distribution at the open boundary, as a function of velocity.
using InflowProfile = std::function<double(double v)>;

// ---------------------------------------------------------------------------
// characteristics

struct TraceResult {
    FlowState state;
    std::size_t steps = 0;
    bool exited = false;
    int reflections = 0;
};

/// One Störmer–Verlet step backward from t_i to t_{i-1}:
///   v' = v - dt/2 qm E(t_i, x);  x' = x - dt v';  v'' = v' - dt/2 qm E(t_{i-1}, x').
/// Periodic domains only; use backward_flow for bounded domains.
FlowState backward_step(const FlowState& state, const FieldHistory& history, std::size_t i,
                        WorkCounter* counter = nullptr);

/// Folds backward_step for i = from_step down to to_step + 1. With
/// `skip_first_half_kick` the opening kick at from_step is omitted.
TraceResult backward_flow(const FlowState& state, const FieldHistory& history, std::size_t from_step,
                          std::size_t to_step, const BoundaryConfig& boundary = {},
                          WorkCounter* counter = nullptr, bool skip_first_half_kick = false);

/// f(t_at, x, v) by tracing back to the source's base step.
double eval_f(const FlowState& point, std::size_t at_step, const FieldHistory& history,
              const DistributionSource& source, const BoundaryConfig& boundary = {},
              const InflowProfile& inflow = {}, WorkCounter* counter = nullptr);

/// Batched evaluation of f(t_at, xs[l], vs[l]) for many points of one
/// species. `xs` holds either one position (shared by all points) or one per
/// point. Returns the largest speed change seen along the traces.
struct BatchTrace {
    double dv_max = 0.0;
    int reflections = 0;
};
BatchTrace eval_f_batch(std::span<const Coords> xs, std::span<const Coords> vs, double qm, std::size_t at_step,
                        const FieldHistory& history, const DistributionSource& source,
                        const BoundaryConfig& boundary, const InflowProfile& inflow, bool skip_first_half_kick,
                        std::span<double> out, WorkCounter& counter);

// ---------------------------------------------------------------------------
// density assembly

struct SpeciesInput {
    const DistributionSource* source = nullptr;
    PhaseSpaceGrid grid;
    double charge = -1.0;
    double mass = 1.0;
    InflowProfile inflow;
};

struct DensityOptions {
    bool half_step_skip = true;
    VelocityRule rule = VelocityRule::trapezoid;
    double background = 1.0; ///< neutralizing contribution added to every node
    BoundaryConfig boundary;
    int threads = 0;         ///< 0: runtime default
};

/// Per-species velocity moments and integrals gathered during assembly.
///
/// With the half-step skip active, samples sit at the velocity-shifted points
/// v = w_l + dt/2 qm E(t_n, x_k); m0..m2 are moments in w and are corrected by
/// diagnostics once E(t_n) is known. Integrals of functions of f are
/// unaffected by the shift.
struct SpeciesMoments {
    std::vector<double> m0;
    std::vector<Coords> m1;
    std::vector<double> m2;
    double entropy = 0.0; ///< -∫ f ln f
    double l1 = 0.0;
    double l2 = 0.0;      ///< ∫ f²
    double mass = 0.0;
    double min_f = std::numeric_limits<double>::infinity();
    double max_f = -std::numeric_limits<double>::infinity();
    double dv_max = 0.0;
    int reflections = 0;
    bool shifted = false;
};

struct DensityResult {
    ChargeDensity rho;
    std::vector<SpeciesMoments> species;
    WorkCounter work;
};

/// ρ_k = background + Σ_species q Σ_l w_l f(t_n, x_k, v_l).
DensityResult compute_density(std::size_t at_step, const FieldHistory& history,
                              std::span<const SpeciesInput> species, const DensityOptions& opts);

} // namespace nufi
