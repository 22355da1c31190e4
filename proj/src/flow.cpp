#include "nufi/flow.hpp"

#include "nufi/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nufi {

void BoundaryConfig::validate() const {
    const bool lp = left == LeftBoundary::periodic;
    const bool rp = right == RightBoundary::periodic;
    if (lp != rp)
        throw UsageError("periodic boundary must be paired with periodic");
    if (max_reflections < 1)
        throw UsageError("max_reflections must be positive");
}

BoundaryOutcome apply_boundaries(const FlowState& state, const std::vector<AxisSpec>& axes,
                                 const BoundaryConfig& cfg) {
    BoundaryOutcome out{state, false, 0};
    if (cfg.is_periodic()) {
        for (std::size_t d = 0; d < axes.size(); ++d)
            out.state.x[d] = wrap_periodic(state.x[d], axes[d]);
        return out;
    }
    if (axes.size() != 1)
        throw UsageError("non-periodic boundaries are supported in 1D only");
    const double lo = axes[0].min;
    const double hi = axes[0].max;
    double& x = out.state.x[0];
    double& v = out.state.v[0];
    while (true) {
        if (x > hi) {
            if (cfg.right != RightBoundary::reflecting_wall)
                throw UsageError("right boundary is not a wall");
            if (++out.reflections > cfg.max_reflections)
                throw NumericalError("more than " + std::to_string(cfg.max_reflections) +
                                     " wall reflections within one step");
            x = 2.0 * hi - x;
            v = -v;
        } else if (x < lo) {
            out.exited = true;
            return out;
        } else {
            return out;
        }
    }
}

DistributionSource DistributionSource::analytic(Analytic f0, double velocity_support) {
    if (!f0)
        throw UsageError("analytic source needs a function");
    DistributionSource s;
    s.analytic_ = std::move(f0);
    s.base_step_ = 0;
    s.support_ = velocity_support;
    return s;
}

DistributionSource DistributionSource::snapshot(std::shared_ptr<const GridDistribution> snap) {
    if (!snap)
        throw UsageError("snapshot source needs a snapshot");
    DistributionSource s;
    s.base_step_ = snap->step();
    s.support_ = snap->velocity_support();
    s.snapshot_ = std::move(snap);
    return s;
}

namespace {

// With the opening kick skipped the field at from_step is never read.
void require_range(const FieldHistory& h, std::size_t from, std::size_t to, bool skip = false) {
    if (to > from)
        throw UsageError("backward flow requires to_step <= from_step");
    if (from == to)
        return;
    if (!h.has(skip ? from - 1 : from) || !h.has(to))
        throw UsageError("field history lacks steps " + std::to_string(to) + ".." + std::to_string(from) +
                         " (holds " + std::to_string(h.first_step()) + ".." +
                         std::to_string(h.end_step()) + ")");
}

/// Fast field lookups for one history.
struct FieldView {
    const FieldHistory* h;
    int dim;
    bool periodic;
    std::size_t nx;
    double xmin, xmax, len_x, inv_hx;
    field::Periodic2D f2{};
    double ymin = 0, ymax = 0, len_y = 0;

    explicit FieldView(const FieldHistory& hist) : h(&hist) {
        const auto& ax = hist.axes();
        dim = hist.dim();
        periodic = ax[0].boundary == Boundary::periodic;
        nx = ax[0].count;
        xmin = ax[0].min;
        xmax = ax[0].max;
        len_x = ax[0].length();
        inv_hx = 1.0 / ax[0].spacing();
        if (dim == 2) {
            f2 = {ax[0].count, ax[1].count, ax[0].min, ax[1].min, 1.0 / ax[0].spacing(), 1.0 / ax[1].spacing()};
            ymin = ax[1].min;
            ymax = ax[1].max;
            len_y = ax[1].length();
        }
    }

    static inline double wrap(double x, double lo, double hi, double len) noexcept {
        if (x < lo) {
            x += len;
            if (x < lo)
                x = lo + std::fmod(x - lo, len) + len;
            if (x >= hi)
                x = lo;
        } else if (x >= hi) {
            x -= len;
            if (x >= hi)
                x = lo + std::fmod(x - lo, len);
            if (x < lo)
                x = lo;
        }
        return x;
    }

    inline double e1(const double* phi, double x) const noexcept {
        return periodic ? field::periodic_1d(phi, nx, xmin, inv_hx, x) : field::bounded_1d(phi, nx, xmin, inv_hx, x);
    }
};

/// Scalar trace covering every boundary kind.
TraceResult trace_scalar(const FieldView& fv, FlowState s, std::size_t from, std::size_t to,
                         const BoundaryConfig& bc, bool skip) {
    TraceResult r{s, 0, false, 0};
    if (from == to)
        return r;
    const double dt = fv.h->dt();
    const double hk = 0.5 * dt * s.qm;
    const auto& axes = fv.h->axes();
    if (fv.dim == 1) {
        double x = s.x[0], v = s.v[0];
        double e = skip ? 0.0 : fv.e1(fv.h->data(from), x);
        for (std::size_t i = from; i > to; --i) {
            if (!(skip && i == from))
                v -= hk * e;
            x -= dt * v;
            if (fv.periodic) {
                x = FieldView::wrap(x, fv.xmin, fv.xmax, fv.len_x);
            } else if (x > fv.xmax || x < fv.xmin) {
                FlowState tmp{{x, 0.0}, {v, 0.0}, s.qm};
                const auto b = apply_boundaries(tmp, axes, bc);
                r.reflections += b.reflections;
                x = b.state.x[0];
                v = b.state.v[0];
                if (b.exited) {
                    r.state.x[0] = x;
                    r.state.v[0] = v;
                    r.steps = from - i + 1;
                    r.exited = true;
                    return r;
                }
            }
            e = fv.e1(fv.h->data(i - 1), x);
            v -= hk * e;
        }
        r.state.x[0] = x;
        r.state.v[0] = v;
    } else {
        double x = s.x[0], y = s.x[1], u = s.v[0], w = s.v[1];
        double ex = 0.0, ey = 0.0;
        if (!skip)
            fv.f2.eval(fv.h->data(from), x, y, ex, ey);
        for (std::size_t i = from; i > to; --i) {
            if (!(skip && i == from)) {
                u -= hk * ex;
                w -= hk * ey;
            }
            x = FieldView::wrap(x - dt * u, fv.xmin, fv.xmax, fv.len_x);
            y = FieldView::wrap(y - dt * w, fv.ymin, fv.ymax, fv.len_y);
            fv.f2.eval(fv.h->data(i - 1), x, y, ex, ey);
            u -= hk * ex;
            w -= hk * ey;
        }
        r.state.x = {x, y};
        r.state.v = {u, w};
    }
    r.steps = from - to;
    return r;
}

constexpr int kLanes = 8;

/// Lockstep traces of up to kLanes independent periodic 1D characteristics;
/// interleaving hides the latency of the field lookups.
void trace_lanes_1d(const FieldView& fv, double* x, double* v, int n, std::size_t from, std::size_t to, double qm,
                    bool skip) {
    if (from == to)
        return;
    const double dt = fv.h->dt();
    const double hk = 0.5 * dt * qm;
    double e[kLanes] = {};
    if (!skip) {
        const double* phi = fv.h->data(from);
        for (int l = 0; l < n; ++l)
            e[l] = field::periodic_1d(phi, fv.nx, fv.xmin, fv.inv_hx, x[l]);
    }
    for (std::size_t i = from; i > to; --i) {
        const double* phi = fv.h->data(i - 1);
        const bool kick = !(skip && i == from);
        for (int l = 0; l < n; ++l) {
            double vl = v[l];
            if (kick)
                vl -= hk * e[l];
            const double xl = FieldView::wrap(x[l] - dt * vl, fv.xmin, fv.xmax, fv.len_x);
            const double el = field::periodic_1d(phi, fv.nx, fv.xmin, fv.inv_hx, xl);
            x[l] = xl;
            v[l] = vl - hk * el;
            e[l] = el;
        }
    }
}

void trace_lanes_2d(const FieldView& fv, double* x, double* y, double* u, double* w, int n, std::size_t from,
                    std::size_t to, double qm, bool skip) {
    if (from == to)
        return;
    const double dt = fv.h->dt();
    const double hk = 0.5 * dt * qm;
    double ex[kLanes] = {}, ey[kLanes] = {};
    if (!skip) {
        const double* phi = fv.h->data(from);
        for (int l = 0; l < n; ++l)
            fv.f2.eval(phi, x[l], y[l], ex[l], ey[l]);
    }
    for (std::size_t i = from; i > to; --i) {
        const double* phi = fv.h->data(i - 1);
        const bool kick = !(skip && i == from);
        for (int l = 0; l < n; ++l) {
            double ul = u[l], wl = w[l];
            if (kick) {
                ul -= hk * ex[l];
                wl -= hk * ey[l];
            }
            const double xl = FieldView::wrap(x[l] - dt * ul, fv.xmin, fv.xmax, fv.len_x);
            const double yl = FieldView::wrap(y[l] - dt * wl, fv.ymin, fv.ymax, fv.len_y);
            double a, b;
            fv.f2.eval(phi, xl, yl, a, b);
            x[l] = xl;
            y[l] = yl;
            u[l] = ul - hk * a;
            w[l] = wl - hk * b;
            ex[l] = a;
            ey[l] = b;
        }
    }
}

} // namespace

FlowState backward_step(const FlowState& state, const FieldHistory& history, std::size_t i, WorkCounter* counter) {
    if (i == 0)
        throw UsageError("backward_step needs i >= 1");
    require_range(history, i, i - 1);
    if (history.axes()[0].boundary != Boundary::periodic)
        throw UsageError("backward_step handles periodic domains; use backward_flow");
    const FieldView fv(history);
    FlowState in = state;
    for (int d = 0; d < history.dim(); ++d)
        in.x[static_cast<std::size_t>(d)] = wrap_periodic(in.x[static_cast<std::size_t>(d)], history.axes()[d]);
    const auto r = trace_scalar(fv, in, i, i - 1, BoundaryConfig{}, false);
    if (counter)
        counter->verlet_micro_steps += 1;
    return r.state;
}

TraceResult backward_flow(const FlowState& state, const FieldHistory& history, std::size_t from_step,
                          std::size_t to_step, const BoundaryConfig& boundary, WorkCounter* counter, bool skip) {
    require_range(history, from_step, to_step, skip);
    const FieldView fv(history);
    FlowState in = state;
    if (boundary.is_periodic())
        for (int d = 0; d < history.dim(); ++d)
            in.x[static_cast<std::size_t>(d)] = wrap_periodic(in.x[static_cast<std::size_t>(d)], history.axes()[d]);
    auto r = trace_scalar(fv, in, from_step, to_step, boundary, skip);
    if (counter)
        counter->verlet_micro_steps += r.steps;
    return r;
}

double eval_f(const FlowState& point, std::size_t at_step, const FieldHistory& history,
              const DistributionSource& source, const BoundaryConfig& boundary, const InflowProfile& inflow,
              WorkCounter* counter) {
    if (source.base_step() > at_step)
        throw UsageError("source is newer than the requested step");
    const auto r = backward_flow(point, history, at_step, source.base_step(), boundary, counter, false);
    if (counter)
        counter->f_evaluations += 1;
    if (r.exited)
        return inflow ? inflow(r.state.v[0]) : 0.0;
    return source(r.state.x, r.state.v);
}

BatchTrace eval_f_batch(std::span<const Coords> xs, std::span<const Coords> velocities, double qm,
                        std::size_t at_step, const FieldHistory& history, const DistributionSource& source,
                        const BoundaryConfig& boundary, const InflowProfile& inflow, bool skip,
                        std::span<double> out, WorkCounter& counter) {
    const std::size_t from = at_step;
    const std::size_t to = source.base_step();
    if (to > from)
        throw UsageError("source is newer than the requested step");
    require_range(history, from, to, skip);
    if (out.size() != velocities.size())
        throw UsageError("output span size mismatch");
    if (xs.size() != 1 && xs.size() != velocities.size())
        throw UsageError("positions must be one shared point or one per velocity");
    const bool shared_x = xs.size() == 1;
    auto pos = [&](std::size_t l) -> const Coords& { return shared_x ? xs[0] : xs[l]; };
    const FieldView fv(history);
    BatchTrace ct;
    const std::size_t n = velocities.size();
    const std::size_t nsteps = from - to;
    const int dim = history.dim();

    if (!boundary.is_periodic()) {
        for (std::size_t l = 0; l < n; ++l) {
            FlowState s{pos(l), velocities[l], qm};
            const auto r = trace_scalar(fv, s, from, to, boundary, skip);
            counter.verlet_micro_steps += r.steps;
            ct.reflections += r.reflections;
            if (r.exited) {
                out[l] = inflow ? inflow(r.state.v[0]) : 0.0;
            } else {
                out[l] = source(r.state.x, r.state.v);
                // reflections flip the sign only, so compare speeds
                ct.dv_max = std::max(ct.dv_max, std::abs(std::abs(r.state.v[0]) - std::abs(velocities[l][0])));
            }
        }
        counter.f_evaluations += n;
        return ct;
    }

    for (std::size_t base = 0; base < n; base += kLanes) {
        const int m = static_cast<int>(std::min<std::size_t>(kLanes, n - base));
        if (dim == 1) {
            double px[kLanes], vs[kLanes];
            for (int l = 0; l < m; ++l) {
                px[l] = pos(base + l)[0];
                vs[l] = velocities[base + l][0];
            }
            trace_lanes_1d(fv, px, vs, m, from, to, qm, skip);
            for (int l = 0; l < m; ++l) {
                out[base + l] = source(Coords{px[l], 0.0}, Coords{vs[l], 0.0});
                ct.dv_max = std::max(ct.dv_max, std::abs(vs[l] - velocities[base + l][0]));
            }
        } else {
            double px[kLanes], py[kLanes], us[kLanes], ws[kLanes];
            for (int l = 0; l < m; ++l) {
                px[l] = pos(base + l)[0];
                py[l] = pos(base + l)[1];
                us[l] = velocities[base + l][0];
                ws[l] = velocities[base + l][1];
            }
            trace_lanes_2d(fv, px, py, us, ws, m, from, to, qm, skip);
            for (int l = 0; l < m; ++l) {
                out[base + l] = source(Coords{px[l], py[l]}, Coords{us[l], ws[l]});
                const double du = us[l] - velocities[base + l][0];
                const double dw = ws[l] - velocities[base + l][1];
                ct.dv_max = std::max(ct.dv_max, std::sqrt(du * du + dw * dw));
            }
        }
    }
    counter.verlet_micro_steps += n * nsteps;
    counter.f_evaluations += n;
    return ct;
}

DensityResult compute_density(std::size_t at_step, const FieldHistory& history,
                              std::span<const SpeciesInput> species, const DensityOptions& opts) {
    opts.boundary.validate();
    const std::size_t nodes = history.node_count();
    DensityResult res;
    res.rho.assign(nodes, opts.background);
    res.species.resize(species.size());

    for (std::size_t s = 0; s < species.size(); ++s) {
        const SpeciesInput& sp = species[s];
        if (!sp.source)
            throw UsageError("species without distribution source");
        if (sp.grid.spatial_axes() != history.axes())
            throw UsageError("species grid does not match the field geometry");
        if (sp.source->base_step() > at_step)
            throw UsageError("source is newer than the requested step");
        const std::size_t base = sp.source->base_step();
        // the skip only applies when there is a kick to skip; the kick at t_n
        // is unavailable before φ_n is solved, so without skip φ_n must exist.
        const bool skip = opts.half_step_skip && at_step > base;
        if (!skip && at_step > base && !history.has(at_step))
            throw UsageError("density without half-step skip needs the field at the evaluation step");

        const std::size_t nv = sp.grid.velocity_count();
        std::vector<Coords> vel(nv);
        for (std::size_t l = 0; l < nv; ++l)
            vel[l] = sp.grid.velocity_node(l);
        const auto wv = velocity_quadrature_weights(sp.grid, opts.rule);
        const auto wx = spatial_quadrature_weights(sp.grid);
        const double qm = sp.charge / sp.mass;

        SpeciesMoments mom;
        mom.shifted = skip;
        mom.m0.assign(nodes, 0.0);
        mom.m1.assign(nodes, Coords{});
        mom.m2.assign(nodes, 0.0);
        std::vector<double> ent(nodes), l1(nodes), l2(nodes), fmin(nodes), fmax(nodes), dvm(nodes);
        std::vector<int> refl(nodes, 0);
        std::uint64_t steps = 0, evals = 0;

        const long long nn = static_cast<long long>(nodes);
#pragma omp parallel num_threads(opts.threads > 0 ? opts.threads : omp_get_max_threads()) \
    reduction(+ : steps, evals)
        {
            std::vector<double> vals(nv);
            WorkCounter local;
#pragma omp for schedule(dynamic, 4)
            for (long long kk = 0; kk < nn; ++kk) {
                const auto k = static_cast<std::size_t>(kk);
                const Coords xk = sp.grid.spatial_node(k);
                const auto ct = eval_f_batch(std::span<const Coords>(&xk, 1), vel, qm, at_step, history, *sp.source, opts.boundary,
                                                     sp.inflow, skip, vals, local);
                double a0 = 0, a2 = 0, e = 0, n1 = 0, n2 = 0;
                Coords a1{};
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (std::size_t l = 0; l < nv; ++l) {
                    const double f = vals[l];
                    const double wf = wv[l] * f;
                    a0 += wf;
                    a1[0] += wf * vel[l][0];
                    a1[1] += wf * vel[l][1];
                    a2 += wf * (vel[l][0] * vel[l][0] + vel[l][1] * vel[l][1]);
                    if (f > 0.0)
                        e -= wf * std::log(f);
                    n1 += wv[l] * std::abs(f);
                    n2 += wf * f;
                    lo = std::min(lo, f);
                    hi = std::max(hi, f);
                }
                mom.m0[k] = a0;
                mom.m1[k] = a1;
                mom.m2[k] = a2;
                ent[k] = e;
                l1[k] = n1;
                l2[k] = n2;
                fmin[k] = lo;
                fmax[k] = hi;
                dvm[k] = ct.dv_max;
                refl[k] = ct.reflections;
            }
            steps += local.verlet_micro_steps;
            evals += local.f_evaluations;
        }

        for (std::size_t k = 0; k < nodes; ++k) {
            res.rho[k] += sp.charge * mom.m0[k];
            mom.entropy += wx[k] * ent[k];
            mom.l1 += wx[k] * l1[k];
            mom.l2 += wx[k] * l2[k];
            mom.mass += wx[k] * mom.m0[k];
            mom.min_f = std::min(mom.min_f, fmin[k]);
            mom.max_f = std::max(mom.max_f, fmax[k]);
            mom.dv_max = std::max(mom.dv_max, dvm[k]);
            mom.reflections += refl[k];
        }
        res.work.verlet_micro_steps += steps;
        res.work.f_evaluations += evals;
        res.species[s] = std::move(mom);
    }
    return res;
}

} // namespace nufi
