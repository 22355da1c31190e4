#pragma once

#include "nufi/scenarios.hpp"
#include "nufi/simulation.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nufi {

/// Everything a config file can say. Unset optionals fall back to the
/// scenario preset; see README for the grammar.
struct RunSettings {
    std::string scenario = "two_stream_1d";
    ScenarioParams params;
    std::optional<SolverMode> mode;
    std::optional<std::size_t> nx, nv;     ///< per-axis node counts
    std::optional<double> dt;
    std::optional<std::size_t> steps;
    std::optional<double> t_end;           ///< alternative to steps
    std::optional<std::size_t> restart_period;
    std::optional<std::size_t> max_rank;   ///< 0: untruncated
    double tol = 1e-3;
    std::size_t oversampling = 5;
    int power_iterations = 0;
    std::optional<std::size_t> restart_nx, restart_nv;
    std::optional<Interpolation> interpolation;
    std::uint64_t seed = 0;
    int threads = 0;
    std::size_t cadence = 1;
    std::optional<VelocityRule> quadrature;
    std::optional<bool> track_velocity;
    std::optional<double> track_margin;
    bool zero_field = false;
    std::string out = "out";
    std::vector<double> heatmap_times;
    std::size_t heatmap_species = 0;
    std::size_t heatmap_nx = 0, heatmap_nv = 0;
    double heatmap_y = 0.0, heatmap_v = 0.0;
    bool write_phi = false;
    bool checkpoint = false;

    /// Solver configuration: preset expanded, overrides applied, validated.
    RunConfig to_run_config() const;

    bool operator==(const RunSettings&) const = default;
};

/// Parses the sectioned key = value format. Errors carry the line number.
RunSettings parse_config(const std::string& text);
RunSettings load_config(const std::string& path);
/// Inverse of parse_config; numbers are written with 17 significant digits.
std::string format_config(const RunSettings& s);

inline constexpr const char* kTimeseriesHeader = "step,time,E_el,E_kin,E_tot,entropy,l1,l2,mass,min_f,max_f";
void write_timeseries(std::ostream& out, const std::vector<DiagnosticsRow>& rows);
void write_timeseries(const std::string& path, const std::vector<DiagnosticsRow>& rows);
std::vector<DiagnosticsRow> read_timeseries(std::istream& in);

/// Per-species mass, boundary flux and velocity extent per step.
void write_species_series(const std::string& path, const RunConfig& cfg, const RunArtifacts& art);

inline constexpr std::uint32_t kSnapshotVersion = 1;
void dump_snapshot(std::ostream& out, const LowRankSnapshot& s);
void dump_snapshot(const std::string& path, const LowRankSnapshot& s);
/// Velocity support is recomputed from the reconstructed nodal values.
std::shared_ptr<LowRankSnapshot> load_snapshot(std::istream& in, Interpolation interp = Interpolation::linear);
std::shared_ptr<LowRankSnapshot> load_snapshot(const std::string& path,
                                               Interpolation interp = Interpolation::linear);

/// One row per step: step, time, then the nodal potential.
void write_phi(std::ostream& out, const FieldHistory& history, std::size_t from = 0);
void write_phi(const std::string& path, const FieldHistory& history, std::size_t from = 0);
/// Rebuilds a history from write_phi output.
FieldHistory read_phi(std::istream& in, const std::vector<AxisSpec>& axes, double dt);
FieldHistory read_phi(const std::string& path, const std::vector<AxisSpec>& axes, double dt);

/// CSV matrix (rows: x, columns: v) plus a one-line `.meta` sidecar.
void export_heatmap(const std::string& path, const HeatmapFrame& frame);

/// Latest low-rank snapshots, the potential at their step and the velocity
/// bounds, enough for run() to continue from step + 1.
void write_checkpoint(const std::string& dir, std::size_t step,
                      const std::vector<std::shared_ptr<const GridDistribution>>& snapshots,
                      const FieldHistory& history, const std::vector<double>& bounds);
ResumeState read_checkpoint(const std::string& dir, const RunConfig& cfg);

} // namespace nufi
