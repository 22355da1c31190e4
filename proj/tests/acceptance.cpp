// Acceptance criteria. Each criterion prints one line:
//   [PASS] name: detail    or    [FAIL] name: detail
// Run one by name, `fast`, `slow` or `all`.

#include "nufi/diagnostics.hpp"
#include "nufi/error.hpp"
#include "nufi/lowrank.hpp"
#include "nufi/restart.hpp"
#include "nufi/scenarios.hpp"
#include "nufi/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <new>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace nufi;
using std::numbers::pi;

// ---------------------------------------------------------------------------
// allocation audit

namespace {
std::atomic<bool> g_audit{false};
std::atomic<std::size_t> g_largest{0};

void note_alloc(std::size_t n) {
    if (!g_audit.load(std::memory_order_relaxed))
        return;
    std::size_t cur = g_largest.load(std::memory_order_relaxed);
    while (n > cur && !g_largest.compare_exchange_weak(cur, n, std::memory_order_relaxed)) {
    }
}
} // namespace

// Eigen allocates through malloc directly, so interpose the C allocator (glibc)
extern "C" {
void* __libc_malloc(std::size_t);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);

void* malloc(std::size_t n) {
    note_alloc(n);
    return __libc_malloc(n);
}
void* calloc(std::size_t n, std::size_t s) {
    note_alloc(n * s);
    return __libc_calloc(n, s);
}
void* realloc(void* p, std::size_t n) {
    note_alloc(n);
    return __libc_realloc(p, n);
}
void* aligned_alloc(std::size_t a, std::size_t n) {
    note_alloc(n);
    return __libc_memalign(a, n);
}
int posix_memalign(void** out, std::size_t a, std::size_t n) {
    note_alloc(n);
    *out = __libc_memalign(a, n);
    return *out ? 0 : 12;
}
}

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

RunConfig two_stream(std::size_t n, double t_end, SolverMode mode) {
    RunConfig c = two_stream_1d_preset();
    set_spatial_count(c, n);
    set_velocity_count(c, n);
    c.steps = static_cast<std::size_t>(std::llround(t_end / c.dt));
    c.mode = mode;
    return c;
}

RunConfig with_restarts(RunConfig c, std::size_t period, std::size_t rank) {
    c.mode = SolverMode::nufi_lr;
    c.restart_period = period;
    c.policy.max_rank = rank;
    return c;
}

std::vector<double> times(const RunArtifacts& a) {
    std::vector<double> t;
    for (const auto& r : a.rows)
        t.push_back(r.time);
    return t;
}

std::vector<double> electric(const RunArtifacts& a) {
    std::vector<double> e;
    for (const auto& r : a.rows)
        e.push_back(r.electric_energy);
    return e;
}

double max_log_gap(const RunArtifacts& a, const RunArtifacts& b, double t_max) {
    double worst = 0;
    for (std::size_t i = 0; i < std::min(a.rows.size(), b.rows.size()); ++i) {
        if (a.rows[i].time > t_max + 1e-9)
            break;
        worst = std::max(worst, std::abs(std::log10(a.rows[i].electric_energy / b.rows[i].electric_energy)));
    }
    return worst;
}

// report only: where the worst gap sits, and the worst gap away from near-zeros of the reference
// (samples below 1% of the largest reference value within one time unit)
struct GapProfile {
    double worst = 0, at = 0, away = 0;
};

GapProfile gap_profile(const RunArtifacts& a, const RunArtifacts& b, double t_max) {
    GapProfile g;
    const std::size_t n = std::min(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a.rows[i].time > t_max + 1e-9)
            break;
        const double d = std::abs(std::log10(a.rows[i].electric_energy / b.rows[i].electric_energy));
        if (d > g.worst) {
            g.worst = d;
            g.at = a.rows[i].time;
        }
        double local = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(a.rows[j].time - a.rows[i].time) <= 1.0 + 1e-9)
                local = std::max(local, a.rows[j].electric_energy);
        if (a.rows[i].electric_energy >= 1e-2 * local)
            g.away = std::max(g.away, d);
    }
    return g;
}

double window_mean(const RunArtifacts& a, double t0, double t1) {
    double s = 0;
    int n = 0;
    for (const auto& r : a.rows)
        if (r.time >= t0 - 1e-9 && r.time <= t1 + 1e-9) {
            s += r.electric_energy;
            ++n;
        }
    return s / n;
}

// slope of ln E_el over [t0, t1] (twice the field growth rate)
double log_slope(const RunArtifacts& a, double t0, double t1) {
    return 2.0 * fit_growth_rate(times(a), electric(a), t0, t1);
}

double circular_gap(double a, double b, double L) {
    double d = std::fmod(std::abs(a - b), L);
    return std::min(d, L - d);
}

// ---------------------------------------------------------------------------

Outcome free_streaming() {
    RunConfig c = two_stream(64, 10.0, SolverMode::nufi);
    c.zero_field = true;
    const auto art = run(c);
    const PhaseSpaceGrid g = species_grid(c, c.species[0].velocity);
    const auto src = DistributionSource::analytic(c.species[0].f0);
    WorkCounter w;
    const RowMatrix A = evaluate_on_grid(c.steps, art.history, src, {}, g, &w);
    const double t = double(c.steps) * c.dt;
    const AxisSpec& ax = g.spatial(0);
    double worst = 0;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j) {
            const double x = ax.node(i), v = g.velocity(0).node(j);
            const double want = f0_two_stream_1d(wrap_periodic(x - t * v, ax), v);
            worst = std::max(worst, std::abs(A(Eigen::Index(i), Eigen::Index(j)) - want));
        }
    return {worst <= 1e-12, fmt("max |f - f0(x - tv, v)| = %.3e after %zu steps (limit 1e-12)", worst, c.steps)};
}

Outcome reversibility() {
    const RunConfig c = two_stream(64, 50.0, SolverMode::nufi);
    const auto art = run(c);
    const auto& h = art.history;
    const AxisSpec ax = c.spatial[0];
    const double L = ax.length();
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> ux(0, L), uv(-6, 6);
        const FlowState s{{ux(rng), 0}, {uv(rng), 0}, -1.0};
        FlowState b = backward_flow(s, h, c.steps, 0).state;
        // exact forward inverse of the backward Störmer–Verlet map
        const double hk = 0.5 * h.dt() * b.qm;
        for (std::size_t i = 1; i <= c.steps; ++i) {
            b.v[0] += hk * h.eval_E(i - 1, b.x)[0];
            b.x[0] = wrap_periodic(b.x[0] + h.dt() * b.v[0], ax);
            b.v[0] += hk * h.eval_E(i, b.x)[0];
        }
        worst = std::max(worst, circular_gap(b.x[0], s.x[0], L) / L);
        worst = std::max(worst, std::abs(b.v[0] - s.v[0]) / std::max(1.0, std::abs(s.v[0])));
    }
    return {worst <= 1e-12,
            fmt("1000 points, %zu steps of a two-stream field: max relative error %.3e (limit 1e-12)", c.steps, worst)};
}

Outcome sl_equivalence() {
    RunConfig a = two_stream(128, 20.0, SolverMode::sl);
    a.record_rho = true;
    RunConfig b = with_restarts(a, 1, 20);
    b.untruncated = true;
    const auto ra = run(a), rb = run(b);
    double drho = 0, ddiag = 0;
    for (std::size_t n = 0; n < ra.rho.size(); ++n)
        for (std::size_t k = 0; k < ra.rho[n].size(); ++k)
            drho = std::max(drho, std::abs(ra.rho[n][k] - rb.rho[n][k]));
    auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); };
    for (std::size_t i = 0; i < ra.rows.size(); ++i) {
        const auto &p = ra.rows[i], &q = rb.rows[i];
        for (double d : {rel(p.electric_energy, q.electric_energy), rel(p.kinetic_energy, q.kinetic_energy),
                         rel(p.entropy, q.entropy), rel(p.l1_norm, q.l1_norm), rel(p.l2_norm, q.l2_norm),
                         rel(p.mass, q.mass), rel(p.min_f, q.min_f), rel(p.max_f, q.max_f)})
            ddiag = std::max(ddiag, d);
    }
    const bool ok = ra.rows.size() == 201 && rb.rows.size() == 201 && drho <= 1e-13 && ddiag <= 1e-13;
    return {ok, fmt("200 steps at 128^2: max |rho diff| %.3e, max diagnostic diff %.3e (limit 1e-13)", drho, ddiag)};
}

Outcome work_law() {
    const std::size_t P = 128 * 128, N = 50;
    const RunConfig c = two_stream(128, 5.0, SolverMode::nufi);
    const auto art = run(c);

    // the full path (no skip), swept over the recorded field
    const auto src = DistributionSource::analytic(c.species[0].f0);
    const SpeciesInput s{&src, species_grid(c, c.species[0].velocity), -1.0, 1.0, {}};
    DensityOptions off;
    off.half_step_skip = false;
    std::uint64_t full = 0;
    for (std::size_t n = 0; n <= N; ++n)
        full += compute_density(n, art.history, std::span(&s, 1), off).work.verlet_micro_steps;
    const std::uint64_t expect = P * N * (N + 1) / 2;

    const auto lr = run(with_restarts(c, 10, 20));
    std::uint64_t lr_expect = 0;
    for (std::size_t n = 1; n <= N; ++n)
        lr_expect += P * (n - 10 * ((n - 1) / 10));
    const std::uint64_t bound = P * N * 10;
    const bool ok = full == expect && art.density_work.verlet_micro_steps == expect &&
                    lr.density_work.verlet_micro_steps == lr_expect &&
                    lr.density_work.verlet_micro_steps + lr.snapshot_work.verlet_micro_steps <=
                        bound + lr.snapshot_work.verlet_micro_steps;
    return {ok, fmt("nufi: %llu (full path) and %llu (skip) vs P*N(N+1)/2 = %llu; nufi_lr period 10: %llu "
                    "(expected %llu, bound P*N*r = %llu) + %llu in %zu snapshot builds",
                    (unsigned long long)full, (unsigned long long)art.density_work.verlet_micro_steps,
                    (unsigned long long)expect, (unsigned long long)lr.density_work.verlet_micro_steps,
                    (unsigned long long)lr_expect, (unsigned long long)bound,
                    (unsigned long long)lr.snapshot_work.verlet_micro_steps, lr.snapshot_builds)};
}

Outcome memory_law() {
    const std::size_t n = 128, N = 50;
    const std::size_t phase_bytes = n * n * sizeof(double);
    std::string detail;
    bool ok = true;
    for (SolverMode m : {SolverMode::nufi, SolverMode::nufi_lr}) {
        RunConfig c = two_stream(n, 5.0, SolverMode::nufi);
        if (m == SolverMode::nufi_lr)
            c = with_restarts(c, 10, 20);
        g_largest = 0;
        g_audit = true;
        const auto art = run(c);
        g_audit = false;
        const std::size_t reals = art.history.stored_reals();
        const std::size_t largest = g_largest;
        // potentials φ_0 .. φ_N
        const bool good = reals == (N + 1) * n && largest < phase_bytes;
        ok = ok && good;
        detail += fmt("%s%s: history %zu reals (expected %zu), largest allocation %zu B (phase space %zu B)",
                      detail.empty() ? "" : "; ", to_string(m).c_str(), reals, (N + 1) * n, largest, phase_bytes);
    }
    return {ok, detail};
}

// multilinear weights of a query on one side of a matricized grid (test-side oracle)
std::vector<std::pair<std::size_t, double>> side_weights(const std::vector<AxisSpec>& axes, const Coords& q) {
    std::vector<std::pair<std::size_t, double>> out{{0, 1.0}};
    std::size_t stride = 1;
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const AxisSpec& a = axes[d];
        double x = q[d];
        if (a.boundary == Boundary::periodic) {
            x = a.min + std::fmod(x - a.min, a.length());
            if (x < a.min)
                x += a.length();
        } else if (x < a.min || x > a.max) {
            return {};
        }
        const double s = (x - a.min) / a.spacing();
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(s), a.boundary == Boundary::periodic ? a.count - 1 : a.count - 2);
        const double t = s - double(i);
        const std::size_t j = a.boundary == Boundary::periodic ? (i + 1) % a.count : i + 1;
        std::vector<std::pair<std::size_t, double>> next;
        for (const auto& [idx, w] : out) {
            next.push_back({idx + stride * i, w * (1 - t)});
            next.push_back({idx + stride * j, w * t});
        }
        out = std::move(next);
        stride *= a.count;
    }
    return out;
}

Outcome eckart_young() {
    std::mt19937_64 rng(2024);
    double worst_tail = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 20 + int(rng() % 60), n = 15 + int(rng() % 60);
        const int k = 1 + int(rng() % std::min(m, n) - 1);
        Eigen::MatrixXd A(m, n);
        std::normal_distribution<double> g;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                A(i, j) = g(rng);
        const Factorization f = truncate_svd(A, std::size_t(k));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        const auto& s = svd.singularValues();
        const double tail = s.tail(s.size() - k).norm();
        worst_tail = std::max(worst_tail, std::abs((A - f.reconstruct()).norm() - tail));
    }

    double worst_eval = 0;
    std::uniform_real_distribution<double> u(0, 1);
    const std::vector<std::pair<std::vector<AxisSpec>, std::vector<AxisSpec>>> layouts{
        {{AxisSpec::periodic(0, 4 * pi, 17)}, {AxisSpec::bounded(-6, 6, 13)}},
        {{AxisSpec::periodic(0, 3, 7), AxisSpec::periodic(-1, 2, 5)},
         {AxisSpec::bounded(-2, 2, 6), AxisSpec::bounded(-3, 1, 4)}}};
    for (const auto& [rows, cols] : layouts) {
        std::size_t m = 1, n = 1;
        for (const auto& a : rows)
            m *= a.count;
        for (const auto& a : cols)
            n *= a.count;
        Factorization f;
        f.row_factor = RowMatrix::Random(Eigen::Index(m), 4);
        f.col_factor = RowMatrix::Random(Eigen::Index(n), 4);
        f.singular_values = Eigen::VectorXd::Ones(4);
        const Eigen::MatrixXd D = f.reconstruct();
        const InterpGeometry gr(rows), gc(cols);
        for (int q = 0; q < 500; ++q) {
            Coords x{}, v{};
            for (std::size_t d = 0; d < rows.size(); ++d)
                x[d] = rows[d].min + (3 * u(rng) - 1) * rows[d].length();
            for (std::size_t d = 0; d < cols.size(); ++d)
                v[d] = cols[d].min + (1.2 * u(rng) - 0.1) * cols[d].length();
            const auto wr = side_weights(rows, x), wc = side_weights(cols, v);
            double want = 0;
            for (const auto& [i, a] : wr)
                for (const auto& [j, b] : wc)
                    want += a * b * D(Eigen::Index(i), Eigen::Index(j));
            worst_eval = std::max(worst_eval, std::abs(eval_factored_point(f, gr, x, gc, v) - want));
        }
    }
    return {worst_tail <= 1e-10 && worst_eval <= 1e-12,
            fmt("50 matrices: max |error - dense tail| %.3e (limit 1e-10); 1000 queries: max |separable - "
                "interpolated reconstruction| %.3e (limit 1e-12)",
                worst_tail, worst_eval)};
}

Outcome rsvd_quality() {
    const int n = 200;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    auto orthogonal = [&] {
        Eigen::MatrixXd G(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                G(i, j) = g(rng);
        return Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ());
    };
    const Eigen::MatrixXd U = orthogonal(), V = orthogonal();
    Eigen::VectorXd s(n);
    for (int j = 0; j < n; ++j)
        s[j] = std::ldexp(1.0, -j);
    const Eigen::MatrixXd A = U * s.asDiagonal() * V.transpose();
    const double optimal = s.tail(n - 10).norm();
    TruncationPolicy p;
    p.max_rank = 10;
    p.oversampling = 5;
    p.rel_tol = 1e-15;
    const auto oracle = MatvecOracle::from_dense(A);
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Factorization f = rsvd(oracle, p, seed);
        worst = std::max(worst, (A - f.reconstruct()).norm() / optimal);
    }
    return {worst <= 10.0, fmt("sigma_j = 2^-j, 200x200, k=10, p=5, 20 seeds: worst error / optimal tail = %.3f "
                               "(limit 10)",
                               worst)};
}

Outcome growth_rate() {
    const RunConfig c = two_stream(256, 30.0, SolverMode::nufi);
    const auto a = run(c);
    const auto b = run(with_restarts(c, 100, 5));
    const double ref = dispersion_growth_rate(0.5);
    const double ga = fit_growth_rate(times(a), electric(a), 5, 15);
    const double gb = fit_growth_rate(times(b), electric(b), 5, 15);
    const double ea = std::abs(ga - ref) / ref, eb = std::abs(gb - ref) / ref;
    const double gap = max_log_gap(a, b, 30.0);
    return {ea <= 0.05 && eb <= 0.05 && gap <= 0.3,
            fmt("gamma_ref %.6f; fit over [5,15]: nufi %.4f (%.1f%%), nufi_lr %.4f (%.1f%%), limit 5%%; "
                "max |log10 E_el gap| for t <= 30: %.3f (limit 0.3)",
                ref, ga, 100 * ea, gb, 100 * eb, gap)};
}

Outcome saturation() {
    const auto a = run(two_stream(256, 100.0, SolverMode::nufi));
    // straight-line fit of E_el over [30, 100]
    double n = 0, st = 0, se = 0, stt = 0, ste = 0;
    for (const auto& r : a.rows)
        if (r.time >= 30 - 1e-9) {
            n += 1;
            st += r.time;
            se += r.electric_energy;
            stt += r.time * r.time;
            ste += r.time * r.electric_energy;
        }
    const double slope = (n * ste - st * se) / (n * stt - st * st);
    const double mean = se / n;
    const double drift = std::abs(slope) * 70.0 / mean;
    int crossings = 0;
    bool above = false, first = true;
    for (const auto& r : a.rows)
        if (r.time >= 30 - 1e-9) {
            const bool now = r.electric_energy > mean;
            if (!first && now != above)
                ++crossings;
            above = now;
            first = false;
        }
    return {drift <= 0.1 && crossings >= 2,
            fmt("t in [30,100]: mean E_el %.4f, level drift %.2f%% (limit 10%%), %d crossings of the mean", mean,
                100 * drift, crossings)};
}

Outcome dissipation() {
    const auto ref = run(two_stream(256, 100.0, SolverMode::nufi));
    const auto sl = run(two_stream(256, 100.0, SolverMode::sl));
    const auto lr = run(with_restarts(two_stream(256, 100.0, SolverMode::nufi), 100, 20));
    const double e = window_mean(ref, 90, 100);
    const double loss_sl = 1 - window_mean(sl, 90, 100) / e;
    const double loss_lr = 1 - window_mean(lr, 90, 100) / e;
    return {loss_sl > 0 && loss_sl >= 2 * std::abs(loss_lr),
            fmt("mean E_el over [90,100] relative to nufi: sl loses %.1f%%, nufi_lr loses %.1f%% (need a factor 2)",
                100 * loss_sl, 100 * loss_lr)};
}

struct Drift {
    double energy = 0, entropy = 0;
};

Drift drifts(const RunArtifacts& a) {
    Drift d;
    const auto& r0 = a.rows.front();
    for (const auto& r : a.rows) {
        d.energy = std::max(d.energy, std::abs(r.total_energy - r0.total_energy) / std::abs(r0.total_energy));
        d.entropy = std::max(d.entropy, std::abs(r.entropy - r0.entropy) / std::abs(r0.entropy));
    }
    return d;
}

Outcome long_run() {
    const RunConfig base = two_stream(256, 1000.0, SolverMode::nufi);
    const Drift d100 = drifts(run(with_restarts(base, 100, 20)));
    const Drift d10 = drifts(run(with_restarts(base, 10, 20)));
    const bool ok = d100.energy <= 0.04 && d100.entropy <= 0.08 && d10.energy > d100.energy;
    return {ok, fmt("to t = 1000, period 100: energy drift %.2f%% (limit 4%%), entropy drift %.2f%% (limit 8%%); "
                    "period 10: energy drift %.2f%%, entropy drift %.2f%% (must exceed period 100)",
                    100 * d100.energy, 100 * d100.entropy, 100 * d10.energy, 100 * d10.entropy)};
}

Outcome two_stream_2d() {
    RunConfig c = two_stream_2d_preset();
    set_spatial_count(c, 48);
    set_velocity_count(c, 48);
    c.steps = 300;
    c.mode = SolverMode::nufi;
    const auto a = run(c);
    RunConfig l = with_restarts(c, 50, 20);
    l.steps = 500;
    const auto b = run(l);
    const double gap = max_log_gap(a, b, 30.0);
    const double grow = log_slope(b, 15, 25), late = log_slope(b, 40, 50);
    double peak = 0;
    for (const auto& r : b.rows)
        peak = std::max(peak, r.electric_energy);
    const double e5 = b.rows[50].electric_energy;
    const bool ok = gap <= 0.3 && peak >= 100 * e5 && late <= 0.1 * grow;

    // not part of the verdict
    const GapProfile pl = gap_profile(a, b, 30.0);
    RunConfig cub = l;
    cub.steps = 300;
    cub.interpolation = Interpolation::cubic;
    const GapProfile pc = gap_profile(a, run(cub), 30.0);
    return {ok, fmt("48^4: max |log10 E_el gap| for t <= 30: %.3f (limit 0.3); nufi_lr to t = 50: E_el(5) %.3e, "
                    "peak %.3e, ln E_el slope %.3f on [15,25] and %.3f on [40,50]; "
                    "info: worst gap at t = %.1f, %.3f away from E_el near-zeros; "
                    "cubic restarts: %.3f at t = %.1f, %.3f away from near-zeros",
                    gap, e5, peak, grow, late, pl.at, pl.away, pc.worst, pc.at, pc.away)};
}

Outcome shock() {
    RunConfig c = shock_preset();
    set_spatial_count(c, 256);
    c.steps = 500;
    const auto art = run(c);
    bool finite = true;
    for (const auto& r : art.rows)
        for (double v : {r.electric_energy, r.kinetic_energy, r.entropy, r.mass, r.min_f, r.max_f})
            finite = finite && std::isfinite(v);
    double rho_max = 0;
    int events = 0;
    double dm = 0, flux = 0;
    std::string per;
    for (std::size_t s = 0; s < art.species.size(); ++s) {
        const auto& ser = art.species[s];
        rho_max = std::max(rho_max, ser.max_abs_rho);
        events += ser.reflections;
        double f = 0;
        for (std::size_t n = 1; n < ser.inflow_flux.size(); ++n)
            f += 0.5 * c.dt * (ser.inflow_flux[n] + ser.inflow_flux[n - 1]);
        const double d = ser.mass.back() - ser.mass.front();
        dm += d;
        flux += f;
        per += fmt("; %s: mass change %.4f, flux %.4f", c.species[s].name.c_str(), d, f);
    }
    const double mismatch = std::abs(dm - flux) / std::abs(flux);

    // |v| across reflections at the wall, with the run's own field
    const auto& h = art.history;
    const AxisSpec ax = c.spatial[0];
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(-5, 0), uv(-800, 800);
    double worst_speed = 0;
    int checked = 0;
    for (int q = 0; q < 20000; ++q) {
        const std::size_t n = 1 + rng() % (h.end_step() - 1);
        FlowState s{{ux(rng), 0}, {uv(rng), 0}, -1.0};
        s.v[0] -= 0.5 * h.dt() * s.qm * h.eval_E(n, s.x)[0];
        FlowState drift = s;
        drift.x[0] -= h.dt() * s.v[0];
        if (drift.x[0] <= ax.max)
            continue;
        const auto out = apply_boundaries(drift, {ax}, c.boundary);
        ++checked;
        worst_speed = std::max(worst_speed, std::abs(std::abs(out.state.v[0]) - std::abs(s.v[0])));
        if (out.reflections != 1 || out.state.x[0] > ax.max)
            worst_speed = INFINITY;
    }
    const bool ok = finite && rho_max < 10 && mismatch <= 0.01 && events > 0 && worst_speed == 0.0;
    return {ok, fmt("t = 50 at N_x = 256: finite %s, max |rho| %.3f, %d wall reflections in density traces, "
                    "%d checked events with max | |v'| - |v| | = %.1e; total mass change %.4f vs flux integral %.4f "
                    "(%.2f%%, limit 1%%)",
                    finite ? "yes" : "no", rho_max, events, checked, worst_speed, dm, flux, 100 * mismatch) +
                per};
}

const std::vector<std::pair<std::string, Outcome (*)()>>& fast() {
    static const std::vector<std::pair<std::string, Outcome (*)()>> v{
        {"free_streaming", free_streaming}, {"reversibility", reversibility}, {"sl_equivalence", sl_equivalence},
        {"work_law", work_law},             {"memory_law", memory_law},       {"eckart_young", eckart_young},
        {"rsvd_quality", rsvd_quality}};
    return v;
}

const std::vector<std::pair<std::string, Outcome (*)()>>& slow() {
    static const std::vector<std::pair<std::string, Outcome (*)()>> v{
        {"growth_rate", growth_rate}, {"saturation", saturation},       {"dissipation", dissipation},
        {"long_run", long_run},       {"two_stream_2d", two_stream_2d}, {"shock", shock}};
    return v;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::pair<std::string, Outcome (*)()>> todo;
    const std::string which = argc > 1 ? argv[1] : "fast";
    for (const auto* list : {&fast(), &slow()})
        for (const auto& e : *list)
            if (which == e.first || which == "all" || (which == "fast" && list == &fast()) ||
                (which == "slow" && list == &slow()))
                todo.push_back(e);
    if (todo.empty()) {
        std::fprintf(stderr, "unknown criterion '%s'\n", which.c_str());
        return 2;
    }
    int failed = 0;
    for (const auto& [name, fn] : todo) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
