#pragma once

#include "nufi/grid.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace nufi {

/// Charge density on spatial nodes (x fastest).
using ChargeDensity = std::vector<double>;

/// Nodal values of the piecewise (bi)linear potential. Periodic problems use
/// the zero-mean gauge; the Neumann problem uses zero trapezoid mean.
using PotentialCoefficients = std::vector<double>;

/// Spectral solver for -Δφ = ρ - mean(ρ) on a periodic 1D or 2D grid, using
/// the exact symbol |k|². Plans are built once; solve() is not reentrant.
class PeriodicPoissonSolver {
public:
    explicit PeriodicPoissonSolver(std::vector<AxisSpec> axes);
    ~PeriodicPoissonSolver();
    PeriodicPoissonSolver(PeriodicPoissonSolver&&) noexcept;
    PeriodicPoissonSolver& operator=(PeriodicPoissonSolver&&) noexcept;

    PotentialCoefficients solve(std::span<const double> rho);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// -φ'' = ρ - mean(ρ) with φ'(min) = φ'(max) = 0 on a bounded 1D axis.
///
/// Uses the mirrored three-point Laplacian, diagonalized by a type-I cosine
/// transform. The mean is the trapezoid mean, which is exactly the
/// compatibility condition of the mirrored operator.
class NeumannPoissonSolver {
public:
    explicit NeumannPoissonSolver(AxisSpec axis);
    ~NeumannPoissonSolver();
    NeumannPoissonSolver(NeumannPoissonSolver&&) noexcept;
    NeumannPoissonSolver& operator=(NeumannPoissonSolver&&) noexcept;

    PotentialCoefficients solve(std::span<const double> rho);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

PotentialCoefficients solve_poisson_periodic(const std::vector<AxisSpec>& axes, std::span<const double> rho);
PotentialCoefficients solve_poisson_neumann(const AxisSpec& axis, std::span<const double> rho);

/// Append-only potential history, entries[n] belongs to t_n = n*dt.
///
/// A history may start at a later step (`first_step`) when a run is resumed
/// from a checkpoint; only entries from that step onward are held.
class FieldHistory {
public:
    FieldHistory(std::vector<AxisSpec> spatial_axes, double dt, std::size_t first_step = 0);

    int dim() const noexcept { return static_cast<int>(axes_.size()); }
    const std::vector<AxisSpec>& axes() const noexcept { return axes_; }
    double dt() const noexcept { return dt_; }
    std::size_t node_count() const noexcept { return nodes_; }

    std::size_t first_step() const noexcept { return first_; }
    /// One past the last stored step.
    std::size_t end_step() const noexcept { return first_ + entries_.size(); }
    std::size_t step_count() const noexcept { return entries_.size(); }
    bool has(std::size_t step) const noexcept { return step >= first_ && step < end_step(); }

    /// Requires step == end_step().
    void append(std::size_t step, PotentialCoefficients phi);

    const PotentialCoefficients& entry(std::size_t step) const;
    /// Unchecked pointer to the nodal values of a stored step.
    const double* data(std::size_t step) const noexcept { return entries_[step - first_].data(); }

    /// Reals held by the history (entries x nodes).
    std::size_t stored_reals() const noexcept;

    /// E = -grad φ of the linear interpolant at x (wrapped/clamped into the domain).
    Coords eval_E(std::size_t step, const Coords& x) const;

    /// E at every spatial node, using the cell to the right of each node.
    std::vector<Coords> nodal_field(std::size_t step) const;

    /// History restricted to steps >= from (for checkpointing).
    FieldHistory tail(std::size_t from) const;

private:
    std::vector<AxisSpec> axes_;
    double dt_;
    std::size_t first_;
    std::size_t nodes_;
    std::vector<PotentialCoefficients> entries_;
};

void append_field(FieldHistory& history, PotentialCoefficients phi);

namespace field {

/// Fast kernels used by the characteristic tracer. `x` must already lie in
/// the axis range (wrapped or clamped by the caller).

inline double periodic_1d(const double* phi, std::size_t n, double min, double inv_h, double x) noexcept {
    auto j = static_cast<std::size_t>((x - min) * inv_h);
    if (j >= n)
        j = n - 1;
    const std::size_t jp = j + 1 == n ? 0 : j + 1;
    return -(phi[jp] - phi[j]) * inv_h;
}

inline double bounded_1d(const double* phi, std::size_t n, double min, double inv_h, double x) noexcept {
    double s = (x - min) * inv_h;
    std::size_t j = s <= 0.0 ? 0 : static_cast<std::size_t>(s);
    if (j > n - 2)
        j = n - 2;
    return -(phi[j + 1] - phi[j]) * inv_h;
}

struct Periodic2D {
    std::size_t nx, ny;
    double xmin, ymin, inv_hx, inv_hy;

    inline void eval(const double* phi, double x, double y, double& ex, double& ey) const noexcept {
        const double sx = (x - xmin) * inv_hx;
        const double sy = (y - ymin) * inv_hy;
        auto i = static_cast<std::size_t>(sx);
        auto j = static_cast<std::size_t>(sy);
        if (i >= nx)
            i = nx - 1;
        if (j >= ny)
            j = ny - 1;
        const double tx = sx - static_cast<double>(i);
        const double ty = sy - static_cast<double>(j);
        const std::size_t ip = i + 1 == nx ? 0 : i + 1;
        const std::size_t jp = j + 1 == ny ? 0 : j + 1;
        const double p00 = phi[i + nx * j], p10 = phi[ip + nx * j];
        const double p01 = phi[i + nx * jp], p11 = phi[ip + nx * jp];
        ex = -((1.0 - ty) * (p10 - p00) + ty * (p11 - p01)) * inv_hx;
        ey = -((1.0 - tx) * (p01 - p00) + tx * (p11 - p10)) * inv_hy;
    }
};

} // namespace field

} // namespace nufi
