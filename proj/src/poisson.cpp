#include "nufi/poisson.hpp"

#include "nufi/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

namespace nufi {

namespace {

// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

void check_size(std::span<const double> rho, std::size_t expected) {
    if (rho.size() != expected)
        throw UsageError("charge density has " + std::to_string(rho.size()) + " values, grid has " +
                         std::to_string(expected));
}

} // namespace

// ---------------------------------------------------------------------------
// periodic

struct PeriodicPoissonSolver::Impl {
    std::vector<AxisSpec> axes;
    std::size_t n_real = 0;
    std::size_t n_complex = 0;
    double* real = nullptr;
    fftw_complex* spec = nullptr;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    std::vector<double> inv_symbol; // 1/|k|^2 per complex coefficient, 0 for the mean

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (forward)
            fftw_destroy_plan(forward);
        if (backward)
            fftw_destroy_plan(backward);
        fftw_free(real);
        fftw_free(spec);
    }
};

PeriodicPoissonSolver::PeriodicPoissonSolver(std::vector<AxisSpec> axes) : impl_(std::make_unique<Impl>()) {
    if (axes.empty() || axes.size() > 2)
        throw UsageError("periodic Poisson solver supports 1D and 2D");
    for (const auto& a : axes)
        if (a.boundary != Boundary::periodic)
            throw UsageError("periodic Poisson solver requires periodic axes");
    auto& im = *impl_;
    im.axes = std::move(axes);
    const std::size_t nx = im.axes[0].count;
    const std::size_t ny = im.axes.size() == 2 ? im.axes[1].count : 1;
    im.n_real = nx * ny;
    // FFTW row-major: the last dimension is contiguous; our x is fastest.
    const std::size_t nx_c = nx / 2 + 1;
    im.n_complex = nx_c * ny;
    im.real = fftw_alloc_real(im.n_real);
    im.spec = fftw_alloc_complex(im.n_complex);
    {
        std::lock_guard lock(planner_mutex());
        if (im.axes.size() == 1) {
            im.forward = fftw_plan_dft_r2c_1d(int(nx), im.real, im.spec, FFTW_ESTIMATE);
            im.backward = fftw_plan_dft_c2r_1d(int(nx), im.spec, im.real, FFTW_ESTIMATE);
        } else {
            im.forward = fftw_plan_dft_r2c_2d(int(ny), int(nx), im.real, im.spec, FFTW_ESTIMATE);
            im.backward = fftw_plan_dft_c2r_2d(int(ny), int(nx), im.spec, im.real, FFTW_ESTIMATE);
        }
    }
    const double two_pi = 2.0 * std::numbers::pi;
    const double lx = im.axes[0].length();
    const double ly = im.axes.size() == 2 ? im.axes[1].length() : 1.0;
    im.inv_symbol.assign(im.n_complex, 0.0);
    for (std::size_t j = 0; j < ny; ++j) {
        const double mj = j <= ny / 2 ? double(j) : double(j) - double(ny);
        const double ky = im.axes.size() == 2 ? two_pi * mj / ly : 0.0;
        for (std::size_t i = 0; i < nx_c; ++i) {
            const double kx = two_pi * double(i) / lx;
            const double k2 = kx * kx + ky * ky;
            im.inv_symbol[i + nx_c * j] = (i == 0 && j == 0) ? 0.0 : 1.0 / k2;
        }
    }
}

PeriodicPoissonSolver::~PeriodicPoissonSolver() = default;
PeriodicPoissonSolver::PeriodicPoissonSolver(PeriodicPoissonSolver&&) noexcept = default;
PeriodicPoissonSolver& PeriodicPoissonSolver::operator=(PeriodicPoissonSolver&&) noexcept = default;

PotentialCoefficients PeriodicPoissonSolver::solve(std::span<const double> rho) {
    auto& im = *impl_;
    check_size(rho, im.n_real);
    std::copy(rho.begin(), rho.end(), im.real);
    fftw_execute(im.forward);
    const double scale = 1.0 / double(im.n_real);
    for (std::size_t c = 0; c < im.n_complex; ++c) {
        const double s = im.inv_symbol[c] * scale;
        im.spec[c][0] *= s;
        im.spec[c][1] *= s;
    }
    fftw_execute(im.backward);
    return PotentialCoefficients(im.real, im.real + im.n_real);
}

// ---------------------------------------------------------------------------
// Neumann

struct NeumannPoissonSolver::Impl {
    AxisSpec axis;
    double* buf = nullptr;
    fftw_plan dct = nullptr;
    std::vector<double> inv_eig;

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (dct)
            fftw_destroy_plan(dct);
        fftw_free(buf);
    }
};

NeumannPoissonSolver::NeumannPoissonSolver(AxisSpec axis) : impl_(std::make_unique<Impl>()) {
    if (axis.boundary != Boundary::bounded)
        throw UsageError("Neumann Poisson solver requires a bounded axis");
    auto& im = *impl_;
    im.axis = axis;
    const std::size_t n = axis.count;
    im.buf = fftw_alloc_real(n);
    {
        std::lock_guard lock(planner_mutex());
        im.dct = fftw_plan_r2r_1d(int(n), im.buf, im.buf, FFTW_REDFT00, FFTW_ESTIMATE);
    }
    const double h = axis.spacing();
    im.inv_eig.assign(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
        const double lam = (2.0 - 2.0 * std::cos(std::numbers::pi * double(k) / double(n - 1))) / (h * h);
        im.inv_eig[k] = 1.0 / lam;
    }
}

NeumannPoissonSolver::~NeumannPoissonSolver() = default;
NeumannPoissonSolver::NeumannPoissonSolver(NeumannPoissonSolver&&) noexcept = default;
NeumannPoissonSolver& NeumannPoissonSolver::operator=(NeumannPoissonSolver&&) noexcept = default;

PotentialCoefficients NeumannPoissonSolver::solve(std::span<const double> rho) {
    auto& im = *impl_;
    const std::size_t n = im.axis.count;
    check_size(rho, n);
    std::copy(rho.begin(), rho.end(), im.buf);
    fftw_execute(im.dct);
    // REDFT00 is its own inverse up to 2(n-1)
    const double scale = 1.0 / (2.0 * double(n - 1));
    for (std::size_t k = 0; k < n; ++k)
        im.buf[k] *= im.inv_eig[k] * scale;
    fftw_execute(im.dct);
    return PotentialCoefficients(im.buf, im.buf + n);
}

PotentialCoefficients solve_poisson_periodic(const std::vector<AxisSpec>& axes, std::span<const double> rho) {
    PeriodicPoissonSolver s(axes);
    return s.solve(rho);
}

PotentialCoefficients solve_poisson_neumann(const AxisSpec& axis, std::span<const double> rho) {
    NeumannPoissonSolver s(axis);
    return s.solve(rho);
}

// ---------------------------------------------------------------------------
// history

FieldHistory::FieldHistory(std::vector<AxisSpec> spatial_axes, double dt, std::size_t first_step)
    : axes_(std::move(spatial_axes)), dt_(dt), first_(first_step), nodes_(1) {
    if (axes_.empty() || axes_.size() > 2)
        throw UsageError("field history supports 1D and 2D");
    if (axes_.size() == 2)
        for (const auto& a : axes_)
            if (a.boundary != Boundary::periodic)
                throw UsageError("2D fields must be periodic");
    if (!(dt >= 0.0))
        throw UsageError("time step must be non-negative");
    for (const auto& a : axes_)
        nodes_ *= a.count;
}

void FieldHistory::append(std::size_t step, PotentialCoefficients phi) {
    if (step != end_step())
        throw UsageError("field history expects step " + std::to_string(end_step()) + ", got " +
                         std::to_string(step));
    if (phi.size() != nodes_)
        throw UsageError("potential has wrong node count");
    entries_.push_back(std::move(phi));
}

void append_field(FieldHistory& history, PotentialCoefficients phi) {
    history.append(history.end_step(), std::move(phi));
}

const PotentialCoefficients& FieldHistory::entry(std::size_t step) const {
    if (!has(step))
        throw UsageError("no field stored for step " + std::to_string(step));
    return entries_[step - first_];
}

std::size_t FieldHistory::stored_reals() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_)
        n += e.size();
    return n;
}

Coords FieldHistory::eval_E(std::size_t step, const Coords& x) const {
    const double* phi = entry(step).data();
    Coords e{};
    if (axes_.size() == 1) {
        const AxisSpec& a = axes_[0];
        const double inv_h = 1.0 / a.spacing();
        if (a.boundary == Boundary::periodic)
            e[0] = field::periodic_1d(phi, a.count, a.min, inv_h, wrap_periodic(x[0], a));
        else
            e[0] = field::bounded_1d(phi, a.count, a.min, inv_h, std::clamp(x[0], a.min, a.max));
        return e;
    }
    const field::Periodic2D f{axes_[0].count, axes_[1].count, axes_[0].min, axes_[1].min,
                              1.0 / axes_[0].spacing(), 1.0 / axes_[1].spacing()};
    f.eval(phi, wrap_periodic(x[0], axes_[0]), wrap_periodic(x[1], axes_[1]), e[0], e[1]);
    return e;
}

std::vector<Coords> FieldHistory::nodal_field(std::size_t step) const {
    std::vector<Coords> out(nodes_);
    const std::size_t nx = axes_[0].count;
    for (std::size_t k = 0; k < nodes_; ++k) {
        Coords x{};
        x[0] = axes_[0].node(k % nx);
        if (axes_.size() == 2)
            x[1] = axes_[1].node(k / nx);
        out[k] = eval_E(step, x);
    }
    return out;
}

FieldHistory FieldHistory::tail(std::size_t from) const {
    if (from < first_ || from > end_step())
        throw UsageError("history tail start out of range");
    FieldHistory h(axes_, dt_, from);
    for (std::size_t s = from; s < end_step(); ++s)
        h.entries_.push_back(entries_[s - first_]);
    return h;
}

} // namespace nufi
