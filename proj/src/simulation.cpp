#include "nufi/simulation.hpp"

#include "nufi/error.hpp"
#include "nufi/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

namespace nufi {

std::string to_string(SolverMode m) {
    switch (m) {
    case SolverMode::nufi: return "nufi";
    case SolverMode::nufi_lr: return "nufi_lr";
    case SolverMode::sl: return "sl";
    case SolverMode::sl_lr: return "sl_lr";
    }
    return "?";
}

SolverMode parse_solver_mode(const std::string& s) {
    if (s == "nufi")
        return SolverMode::nufi;
    if (s == "nufi_lr")
        return SolverMode::nufi_lr;
    if (s == "sl")
        return SolverMode::sl;
    if (s == "sl_lr")
        return SolverMode::sl_lr;
    throw UsageError("unknown solver mode '" + s + "' (nufi, nufi_lr, sl, sl_lr)");
}

void SpeciesConfig::validate(int dim) const {
    if (!(mass > 0.0))
        throw UsageError("species " + name + ": mass must be positive");
    if (!f0)
        throw UsageError("species " + name + ": no initial condition");
    if (int(velocity.size()) != dim)
        throw UsageError("species " + name + ": velocity dimension does not match space");
    for (const auto& a : velocity) {
        a.validate();
        if (a.boundary != Boundary::bounded)
            throw UsageError("species " + name + ": velocity axes must be bounded");
    }
}

std::size_t RunConfig::effective_period() const {
    switch (mode) {
    case SolverMode::nufi: return 0;
    case SolverMode::nufi_lr: return restart_period;
    case SolverMode::sl:
    case SolverMode::sl_lr: return 1;
    }
    return 0;
}

Compression RunConfig::compression() const {
    switch (mode) {
    case SolverMode::nufi_lr: return untruncated ? Compression::none : Compression::randomized;
    case SolverMode::sl_lr: return untruncated ? Compression::none : Compression::dense_svd;
    default: return Compression::none;
    }
}

namespace {

std::vector<AxisSpec> restart_spatial(const RunConfig& cfg) {
    std::vector<AxisSpec> ax = cfg.spatial;
    if (cfg.mode != SolverMode::sl && cfg.restart_nx > 0)
        for (auto& a : ax)
            a.count = cfg.restart_nx;
    return ax;
}

std::vector<AxisSpec> restart_velocity(const RunConfig& cfg, std::vector<AxisSpec> v) {
    if (cfg.mode != SolverMode::sl && cfg.restart_nv > 0)
        for (auto& a : v)
            a.count = cfg.restart_nv;
    return v;
}

std::uint64_t mix_seed(std::uint64_t seed, std::size_t step, std::size_t species) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (std::uint64_t(step) + 1)) ^
                      (0xC2B2AE3D27D4EB4Full * (std::uint64_t(species) + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void require_finite(std::span<const double> values, const char* what, std::size_t step) {
    for (std::size_t k = 0; k < values.size(); ++k)
        if (!std::isfinite(values[k]))
            throw NumericalError(std::string("non-finite ") + what + " at step " + std::to_string(step) +
                                 ", node " + std::to_string(k));
}

double symmetric_bound(const AxisSpec& a) {
    return std::max(std::abs(a.min), std::abs(a.max));
}

} // namespace

void RunConfig::validate() const {
    if (spatial.empty() || spatial.size() > 2)
        throw UsageError("spatial dimension must be 1 or 2");
    for (const auto& a : spatial)
        a.validate();
    const int dim = int(spatial.size());
    const bool periodic = spatial[0].boundary == Boundary::periodic;
    for (const auto& a : spatial)
        if ((a.boundary == Boundary::periodic) != periodic)
            throw UsageError("mixed periodic and bounded spatial axes");
    boundary.validate();
    if (boundary.is_periodic() != periodic)
        throw UsageError("boundary conditions do not match the spatial axes");
    if (!periodic && dim != 1)
        throw UsageError("bounded domains are supported in 1D only");
    if (species.empty())
        throw UsageError("no species configured");
    for (const auto& s : species) {
        s.validate(dim);
        if (boundary.left == LeftBoundary::open_inflow && !s.inflow)
            throw UsageError("species " + s.name + ": open boundary needs an inflow profile");
    }
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw UsageError("dt must be positive");
    if (cadence < 1)
        throw UsageError("diagnostics cadence must be at least 1");
    if (mode == SolverMode::nufi_lr && restart_period < 1)
        throw UsageError("restart period must be at least 1");
    if (tracking.enabled && (dim != 1 || !(tracking.margin >= 0.0)))
        throw UsageError("velocity tracking needs a 1D run and a non-negative margin");

    const Compression c = compression();
    if (c != Compression::none) {
        policy.validate();
        const auto rs = restart_spatial(*this);
        std::size_t rows = 1;
        for (const auto& a : rs)
            rows *= a.count;
        for (const auto& s : species) {
            const auto rv = restart_velocity(*this, s.velocity);
            std::size_t cols = 1;
            for (const auto& a : rv)
                cols *= a.count;
            const std::size_t need = c == Compression::randomized ? policy.max_rank + policy.oversampling
                                                                  : policy.max_rank;
            if (need > std::min(rows, cols))
                throw UsageError("max_rank" + std::string(c == Compression::randomized ? " + oversampling" : "") +
                                 " (" + std::to_string(need) + ") exceeds the restart grid dimensions (" +
                                 std::to_string(rows) + " x " + std::to_string(cols) + ")");
        }
    }
    for (const auto& h : heatmaps)
        if (h.species >= species.size() || h.time < 0.0)
            throw UsageError("heatmap request refers to an unknown species or negative time");
}

double track_velocity_support(double bound, double observed, double margin) {
    if (observed > bound)
        return observed * (1.0 + margin);
    return bound;
}

std::size_t tracked_velocity_count(double bound, double bound0, std::size_t n0, std::size_t min_count) {
    const auto n = static_cast<std::size_t>(std::llround(double(n0) * bound / bound0));
    return std::max(min_count, n);
}

PhaseSpaceGrid species_grid(const RunConfig& cfg, const std::vector<AxisSpec>& velocity) {
    return PhaseSpaceGrid(cfg.spatial, velocity);
}

HeatmapFrame evaluate_heatmap(const HeatmapRequest& req, std::size_t step, const FieldHistory& history,
                              const DistributionSource& source, const SpeciesDynamics& dyn,
                              const PhaseSpaceGrid& eval_grid, int threads) {
    HeatmapFrame fr;
    fr.request = req;
    fr.step = step;
    fr.time = double(step) * history.dt();
    fr.x_axis = eval_grid.spatial(0);
    fr.v_axis = eval_grid.velocity(0);
    if (req.nx > 0)
        fr.x_axis.count = req.nx;
    if (req.nv > 0)
        fr.v_axis.count = req.nv;
    if (eval_grid.dim() == 1) {
        const PhaseSpaceGrid g({fr.x_axis}, {fr.v_axis});
        WorkCounter w;
        fr.values = evaluate_on_grid(step, history, source, dyn, g, &w, threads);
        return fr;
    }
    const std::size_t m = fr.x_axis.count, n = fr.v_axis.count;
    std::vector<Coords> xs(n), vs(n);
    for (std::size_t j = 0; j < n; ++j)
        vs[j] = {fr.v_axis.node(j), req.v};
    fr.values.resize(Eigen::Index(m), Eigen::Index(n));
    WorkCounter w;
    for (std::size_t i = 0; i < m; ++i) {
        const Coords x{fr.x_axis.node(i), req.y};
        eval_f_batch(std::span<const Coords>(&x, 1), vs, dyn.qm, step, history, source, dyn.boundary, dyn.inflow,
                     false, std::span<double>(fr.values.row(Eigen::Index(i)).data(), n), w);
    }
    return fr;
}

RunArtifacts run(const RunConfig& cfg, const ResumeState* resume) {
    cfg.validate();
    const std::size_t S = cfg.species.size();
    const bool periodic = cfg.spatial[0].boundary == Boundary::periodic;

    RunArtifacts art;
    art.species.resize(S);

    std::vector<std::vector<AxisSpec>> vel(S);
    std::vector<double> bound0(S), bound(S);
    std::vector<std::size_t> count0(S);
    for (std::size_t s = 0; s < S; ++s) {
        vel[s] = cfg.species[s].velocity;
        bound0[s] = symmetric_bound(vel[s][0]);
        count0[s] = vel[s][0].count;
        bound[s] = bound0[s];
    }

    std::size_t start = 0;
    FieldHistory history(cfg.spatial, cfg.dt);
    std::vector<DistributionSource> sources;
    if (resume) {
        start = resume->next_step;
        history = resume->history;
        if (history.axes() != cfg.spatial || history.dt() != cfg.dt)
            throw UsageError("resume history does not match the configured grid or dt");
        if (history.end_step() != start)
            throw UsageError("resume history must end right before the resume step");
        if (resume->sources.size() != S)
            throw UsageError("resume state needs one source entry per species");
        if (!resume->velocity_bounds.empty()) {
            if (resume->velocity_bounds.size() != S)
                throw UsageError("resume state needs one velocity bound per species");
            for (std::size_t s = 0; s < S; ++s) {
                bound[s] = resume->velocity_bounds[s];
                if (cfg.tracking.enabled && bound[s] != bound0[s]) {
                    const std::size_t nv = tracked_velocity_count(bound[s], bound0[s], count0[s], cfg.tracking.min_count);
                    vel[s] = {AxisSpec::bounded(-bound[s], bound[s], nv)};
                }
            }
        }
    }
    for (std::size_t s = 0; s < S; ++s) {
        if (resume && resume->sources[s]) {
            sources.push_back(DistributionSource::snapshot(resume->sources[s]));
            if (sources.back().base_step() < history.first_step())
                throw UsageError("resume history does not reach back to the snapshot step");
        } else {
            if (resume && history.first_step() != 0)
                throw UsageError("analytic sources need the full field history");
            sources.push_back(DistributionSource::analytic(cfg.species[s].f0, bound[s]));
        }
    }

    std::variant<PeriodicPoissonSolver, NeumannPoissonSolver> solver =
        periodic ? std::variant<PeriodicPoissonSolver, NeumannPoissonSolver>(PeriodicPoissonSolver(cfg.spatial))
                 : std::variant<PeriodicPoissonSolver, NeumannPoissonSolver>(NeumannPoissonSolver(cfg.spatial[0]));

    double background = 0.0;
    for (const auto& s : cfg.species)
        background += s.background;

    // φ_n is unknown while ρ_n is assembled, so the opening kick is always skipped
    DensityOptions dopts;
    dopts.rule = cfg.rule;
    dopts.background = background;
    dopts.boundary = cfg.boundary;
    dopts.threads = cfg.threads;

    const std::size_t period = cfg.effective_period();
    std::vector<SpeciesDynamics> dyn(S);
    for (std::size_t s = 0; s < S; ++s)
        dyn[s] = {int(s), cfg.species[s].charge / cfg.species[s].mass, cfg.species[s].inflow, cfg.boundary};

    std::vector<std::size_t> heat_steps;
    for (const auto& h : cfg.heatmaps)
        heat_steps.push_back(static_cast<std::size_t>(std::llround(h.time / cfg.dt)));

    for (std::size_t n = start; n <= cfg.steps; ++n) {
        std::vector<SpeciesInput> inputs(S);
        for (std::size_t s = 0; s < S; ++s)
            inputs[s] = {&sources[s], species_grid(cfg, vel[s]), cfg.species[s].charge, cfg.species[s].mass,
                         cfg.species[s].inflow};

        DensityResult dens = compute_density(n, history, inputs, dopts);
        art.density_work += dens.work;
        require_finite(dens.rho, "charge density", n);

        PotentialCoefficients phi;
        if (cfg.zero_field)
            phi.assign(history.node_count(), 0.0);
        else
            phi = std::visit([&](auto& sv) { return sv.solve(dens.rho); }, solver);
        require_finite(phi, "potential", n);
        history.append(n, std::move(phi));

        const PhaseIntegrals pi = combine_integrals(dens, history, n, inputs);
        DiagnosticsRow row;
        row.step = n;
        row.time = double(n) * cfg.dt;
        row.electric_energy = electric_energy(history, n);
        row.kinetic_energy = pi.kinetic_energy;
        row.total_energy = row.electric_energy + row.kinetic_energy;
        row.entropy = pi.entropy;
        row.l1_norm = pi.l1;
        row.l2_norm = pi.l2;
        row.mass = pi.mass;
        row.min_f = pi.min_f;
        row.max_f = pi.max_f;
        if (n % cfg.cadence == 0 || n == cfg.steps)
            art.rows.push_back(row);

        double rho_max = 0.0;
        for (double r : dens.rho)
            rho_max = std::max(rho_max, std::abs(r));
        const double e0 = periodic ? 0.0 : history.eval_E(n, Coords{cfg.spatial[0].min, 0.0})[0];
        for (std::size_t s = 0; s < S; ++s) {
            const SpeciesMoments& m = dens.species[s];
            SpeciesSeries& ser = art.species[s];
            ser.mass.push_back(m.mass);
            double flux = 0.0;
            if (!periodic) {
                const double c0 = m.shifted ? 0.5 * cfg.dt * dyn[s].qm * e0 : 0.0;
                flux = m.m1[0][0] + c0 * m.m0[0];
            }
            ser.inflow_flux.push_back(flux);
            ser.velocity_bound.push_back(bound[s]);
            ser.velocity_count.push_back(inputs[s].grid.velocity_count());
            ser.max_abs_rho = std::max(ser.max_abs_rho, rho_max);
            ser.reflections += m.reflections;
        }
        if (cfg.record_rho)
            art.rho.push_back(dens.rho);

        for (std::size_t h = 0; h < cfg.heatmaps.size(); ++h)
            if (heat_steps[h] == n) {
                const std::size_t s = cfg.heatmaps[h].species;
                art.heatmaps.push_back(
                    evaluate_heatmap(cfg.heatmaps[h], n, history, sources[s], dyn[s], inputs[s].grid, cfg.threads));
            }

        // support seen by this step's traces, before any restart replaces the source
        std::vector<double> observed(S, 0.0);
        for (std::size_t s = 0; s < S; ++s)
            observed[s] = sources[s].velocity_support() + dens.species[s].dv_max;

        const bool restart = period > 0 && n >= 1 && n % period == 0;
        if (restart) {
            RestartConfig rc;
            rc.period = period;
            rc.policy = cfg.policy;
            rc.compression = cfg.compression();
            rc.interpolation = cfg.interpolation;
            for (std::size_t s = 0; s < S; ++s) {
                rc.restart_grid = PhaseSpaceGrid(restart_spatial(cfg), restart_velocity(cfg, vel[s]));
                auto b = build_snapshot(n, history, sources[s], dyn[s], rc, mix_seed(cfg.seed, n, s), cfg.threads);
                art.snapshot_work += b.work;
                ++art.snapshot_builds;
                if (const auto* lr = dynamic_cast<const LowRankSnapshot*>(b.snapshot.get()))
                    art.snapshot_ranks.push_back(lr->rank());
                if (cfg.keep_snapshots) {
                    art.snapshots.push_back({n, s, b.snapshot});
                } else {
                    auto it = std::find_if(art.snapshots.begin(), art.snapshots.end(),
                                           [s](const SnapshotRecord& r) { return r.species == s; });
                    if (it == art.snapshots.end())
                        art.snapshots.push_back({n, s, b.snapshot});
                    else
                        *it = {n, s, b.snapshot};
                }
                sources[s] = DistributionSource::snapshot(std::move(b.snapshot));
            }
        }

        if (cfg.tracking.enabled) {
            for (std::size_t s = 0; s < S; ++s) {
                const double nb = track_velocity_support(bound[s], observed[s], cfg.tracking.margin);
                if (nb != bound[s]) {
                    bound[s] = nb;
                    const std::size_t nv =
                        tracked_velocity_count(nb, bound0[s], count0[s], cfg.tracking.min_count);
                    vel[s] = {AxisSpec::bounded(-nb, nb, nv)};
                }
            }
        }

        if (restart && cfg.on_restart) {
            std::vector<std::shared_ptr<const GridDistribution>> snaps;
            for (const auto& src : sources)
                snaps.push_back(src.grid_distribution());
            cfg.on_restart(n, snaps, history, bound);
        }

        art.completed_steps = n + 1;
        if (cfg.on_step && !cfg.on_step(row)) {
            art.stopped_early = n < cfg.steps;
            if (art.rows.empty() || art.rows.back().step != n)
                art.rows.push_back(row);
            break;
        }
    }
    art.history = std::move(history);
    return art;
}

} // namespace nufi
