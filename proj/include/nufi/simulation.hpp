#pragma once

#include "nufi/diagnostics.hpp"
#include "nufi/flow.hpp"
#include "nufi/restart.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nufi {

enum class SolverMode { nufi, nufi_lr, sl, sl_lr };

std::string to_string(SolverMode m);
SolverMode parse_solver_mode(const std::string& s);

struct SpeciesConfig {
    std::string name = "electrons";
    double charge = -1.0;
    double mass = 1.0;
    DistributionSource::Analytic f0;
    double background = 0.0;          ///< added to ρ at every node
    std::vector<AxisSpec> velocity;   ///< initial velocity axes of the evaluation grid
    InflowProfile inflow;             ///< f at the open boundary, by velocity

    void validate(int dim) const;
};

/// Expanding symmetric velocity bounds (bounded-domain runs).
struct VelocityTracking {
    bool enabled = false;
    double margin = 0.1;
    std::size_t min_count = 64;
};

struct HeatmapRequest {
    double time = 0.0;
    std::size_t species = 0;
    std::size_t nx = 0, nv = 0;      ///< 0: evaluation grid
    // 2D: slice at fixed (y, v)
    double y = 0.0, v = 0.0;
};

struct HeatmapFrame {
    HeatmapRequest request;
    std::size_t step = 0;
    double time = 0.0;
    AxisSpec x_axis, v_axis;
    RowMatrix values; ///< rows: x, cols: v (u for 2D slices)
};

struct RunConfig {
    std::string scenario = "custom";
    std::vector<AxisSpec> spatial;
    std::vector<SpeciesConfig> species;
    BoundaryConfig boundary;
    double dt = 0.1;
    std::size_t steps = 100;

    SolverMode mode = SolverMode::nufi;
    std::size_t restart_period = 100;
    bool untruncated = false;               ///< nufi_lr / sl_lr: keep the full matrix
    TruncationPolicy policy;
    std::size_t restart_nx = 0, restart_nv = 0; ///< restart grid counts per axis; 0: evaluation grid
    std::uint64_t seed = 0;
    Interpolation interpolation = Interpolation::linear; ///< between restart-grid nodes

    int threads = 0;
    VelocityRule rule = VelocityRule::trapezoid;
    VelocityTracking tracking;
    bool zero_field = false;                ///< force E = 0 (free streaming)
    bool record_rho = false;
    std::size_t cadence = 1;                ///< diagnostics rows kept every `cadence` steps
    std::vector<HeatmapRequest> heatmaps;
    bool keep_snapshots = false;            ///< retain every snapshot in the artifacts

    /// Called after each step's row is computed; return false to stop early.
    std::function<bool(const DiagnosticsRow&)> on_step;
    /// Called at restart steps once the new sources and velocity bounds are set.
    std::function<void(std::size_t step, const std::vector<std::shared_ptr<const GridDistribution>>& sources,
                       const FieldHistory& history, const std::vector<double>& velocity_bounds)>
        on_restart;

    void validate() const;
    /// Restart period in effect for the mode (0: never).
    std::size_t effective_period() const;
    Compression compression() const;
};

struct SpeciesSeries {
    std::vector<double> mass;          ///< ∫∫ f per step
    std::vector<double> inflow_flux;   ///< ∫ v f at x_min per step (bounded runs)
    std::vector<double> velocity_bound;
    std::vector<std::size_t> velocity_count;
    double max_abs_rho = 0.0;
    int reflections = 0;
};

struct SnapshotRecord {
    std::size_t step = 0;
    std::size_t species = 0;
    std::shared_ptr<const GridDistribution> snapshot;
};

/// State needed to continue a run after `next_step - 1`.
struct ResumeState {
    std::size_t next_step = 0;
    FieldHistory history{{AxisSpec{}}, 0.0};
    std::vector<std::shared_ptr<const GridDistribution>> sources; ///< per species; null: analytic f0
    std::vector<double> velocity_bounds;                          ///< per species; empty: configured
};

struct RunArtifacts {
    std::vector<DiagnosticsRow> rows;
    std::vector<SpeciesSeries> species;
    std::vector<std::vector<double>> rho; ///< per step when record_rho
    FieldHistory history{{AxisSpec{}}, 0.0};
    std::vector<SnapshotRecord> snapshots; ///< every build when keep_snapshots, else the latest per species
    std::vector<HeatmapFrame> heatmaps;
    WorkCounter density_work;
    WorkCounter snapshot_work;
    std::size_t snapshot_builds = 0;
    std::vector<std::size_t> snapshot_ranks;
    std::size_t completed_steps = 0; ///< last step index + 1
    bool stopped_early = false;
};

RunArtifacts run(const RunConfig& cfg, const ResumeState* resume = nullptr);

/// Bounds never shrink; an observed extent beyond the bound becomes
/// observed * (1 + margin).
double track_velocity_support(double bound, double observed, double margin);

/// Velocity node count for a tracked bound: max(min_count, round(n0 * bound / bound0)).
std::size_t tracked_velocity_count(double bound, double bound0, std::size_t n0, std::size_t min_count);

/// Evaluation grid of one species for given velocity axes.
PhaseSpaceGrid species_grid(const RunConfig& cfg, const std::vector<AxisSpec>& velocity);

/// f(t_step) sampled on an arbitrary 1D1V grid, or on an (x, u) slice of a
/// 2D2V grid at fixed (y, v).
HeatmapFrame evaluate_heatmap(const HeatmapRequest& req, std::size_t step, const FieldHistory& history,
                              const DistributionSource& source, const SpeciesDynamics& dyn,
                              const PhaseSpaceGrid& eval_grid, int threads = 0);

} // namespace nufi
