#include "nufi/diagnostics.hpp"

#include "nufi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nufi {

double electric_energy(const std::vector<AxisSpec>& axes, std::span<const double> phi) {
    if (axes.empty() || axes.size() > 2)
        throw UsageError("electric energy supports 1D and 2D");
    std::size_t nodes = 1;
    for (const auto& a : axes)
        nodes *= a.count;
    if (phi.size() != nodes)
        throw UsageError("potential has wrong node count");

    if (axes.size() == 1) {
        const AxisSpec& a = axes[0];
        const double h = a.spacing();
        const std::size_t n = a.count;
        const std::size_t cells = a.boundary == Boundary::periodic ? n : n - 1;
        double sum = 0.0;
        for (std::size_t j = 0; j < cells; ++j) {
            const double e = (phi[(j + 1) % n] - phi[j]) / h;
            sum += e * e;
        }
        return 0.5 * h * sum;
    }

    const std::size_t nx = axes[0].count, ny = axes[1].count;
    const double hx = axes[0].spacing(), hy = axes[1].spacing();
    auto at = [&](std::size_t i, std::size_t j) { return phi[(i % nx) + nx * (j % ny)]; };
    double sum = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const double a = (at(i + 1, j) - at(i, j)) / hx;
            const double b = (at(i + 1, j + 1) - at(i, j + 1)) / hx;
            const double c = (at(i, j + 1) - at(i, j)) / hy;
            const double d = (at(i + 1, j + 1) - at(i + 1, j)) / hy;
            sum += (a * a + a * b + b * b) / 3.0 + (c * c + c * d + d * d) / 3.0;
        }
    }
    return 0.5 * hx * hy * sum;
}

double electric_energy(const FieldHistory& history, std::size_t step) {
    return electric_energy(history.axes(), history.entry(step));
}

std::vector<double> species_kinetic_energy(const DensityResult& density, const FieldHistory& history,
                                           std::size_t step, std::span<const SpeciesInput> species) {
    if (density.species.size() != species.size())
        throw UsageError("moment and species lists differ in length");
    std::vector<double> out(species.size(), 0.0);
    std::vector<Coords> field;
    for (std::size_t s = 0; s < species.size(); ++s) {
        const SpeciesMoments& m = density.species[s];
        const SpeciesInput& sp = species[s];
        const auto wx = spatial_quadrature_weights(sp.grid);
        if (m.shifted && field.empty())
            field = history.nodal_field(step);
        const double half_kick = 0.5 * history.dt() * sp.charge / sp.mass;
        double sum = 0.0;
        for (std::size_t k = 0; k < wx.size(); ++k) {
            double v2 = m.m2[k];
            if (m.shifted) {
                const double cx = half_kick * field[k][0];
                const double cy = half_kick * field[k][1];
                v2 += 2.0 * (cx * m.m1[k][0] + cy * m.m1[k][1]) + (cx * cx + cy * cy) * m.m0[k];
            }
            sum += wx[k] * v2;
        }
        out[s] = 0.5 * sp.mass * sum;
    }
    return out;
}

PhaseIntegrals combine_integrals(const DensityResult& density, const FieldHistory& history, std::size_t step,
                                 std::span<const SpeciesInput> species) {
    PhaseIntegrals p;
    p.min_f = std::numeric_limits<double>::infinity();
    p.max_f = -std::numeric_limits<double>::infinity();
    const auto ke = species_kinetic_energy(density, history, step, species);
    for (std::size_t s = 0; s < species.size(); ++s) {
        const SpeciesMoments& m = density.species[s];
        p.kinetic_energy += ke[s];
        p.entropy += m.entropy;
        p.l1 += m.l1;
        p.l2 += m.l2;
        p.mass += m.mass;
        p.min_f = std::min(p.min_f, m.min_f);
        p.max_f = std::max(p.max_f, m.max_f);
    }
    return p;
}

PhaseIntegrals kinetic_energy_entropy_norms(std::size_t at_step, const FieldHistory& history,
                                            std::span<const SpeciesInput> species, const DensityOptions& opts) {
    DensityOptions o = opts;
    o.half_step_skip = false;
    const auto d = compute_density(at_step, history, species, o);
    return combine_integrals(d, history, at_step, species);
}

double fit_growth_rate(std::span<const double> time, std::span<const double> energy, double t0, double t1) {
    if (time.size() != energy.size())
        throw UsageError("time and energy series differ in length");
    double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < time.size(); ++i) {
        const double t = time[i];
        if (t < t0 || t > t1)
            continue;
        if (!(energy[i] > 0.0))
            throw NumericalError("non-positive energy at t = " + std::to_string(t) + " inside the fit window");
        const double y = std::log(energy[i]);
        n += 1;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    if (n < 2)
        throw UsageError("fit window holds fewer than two samples");
    const double denom = n * stt - st * st;
    return 0.5 * (n * sty - st * sy) / denom;
}

double find_growth_rate(const std::function<double(double)>& D, double gamma_max) {
    constexpr int kScan = 2000;
    double lo = 0.0, dlo = 0.0;
    bool found = false;
    double prev_g = gamma_max * 1e-6;
    double prev_d = D(prev_g);
    for (int i = 1; i <= kScan; ++i) {
        const double g = gamma_max * double(i) / kScan;
        const double d = D(g);
        if ((prev_d < 0.0) != (d < 0.0)) {
            lo = prev_g;
            dlo = prev_d;
            prev_g = g;
            found = true;
            break;
        }
        prev_g = g;
        prev_d = d;
    }
    if (!found)
        throw NumericalError("dispersion relation has no growing root in (0, " + std::to_string(gamma_max) + "]");
    double hi = prev_g;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double dm = D(mid);
        if ((dm < 0.0) == (dlo < 0.0)) {
            lo = mid;
            dlo = dm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::function<double(double)> dispersion_function(std::function<double(double)> f0_prime, double k, double vmin,
                                                  double vmax, std::size_t intervals) {
    if (intervals % 2)
        ++intervals;
    // sample f0' once; only the resonant denominator depends on γ
    const double h = (vmax - vmin) / double(intervals);
    std::vector<double> v(intervals + 1), g(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i) {
        v[i] = vmin + double(i) * h;
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        g[i] = w * h / 3.0 * v[i] * f0_prime(v[i]);
    }
    return [v = std::move(v), g = std::move(g), k](double gamma) {
        const double c2 = (gamma / k) * (gamma / k);
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            sum += g[i] / (v[i] * v[i] + c2);
        return 1.0 - sum / (k * k);
    };
}

std::function<double(double)> cold_beam_dispersion(double a, double k) {
    return [a, k](double gamma) {
        const double A = k * k * a * a;
        const double g2 = gamma * gamma;
        return 1.0 - (A - g2) / ((A + g2) * (A + g2));
    };
}

double cold_beam_growth_rate(double a, double k) {
    const double A = k * k * a * a;
    const double s = 0.5 * (std::sqrt(1.0 + 8.0 * A) - 1.0 - 2.0 * A);
    return s > 0.0 ? std::sqrt(s) : 0.0;
}

double dispersion_growth_rate(double k) {
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    auto f0p = [norm](double v) { return norm * (2.0 * v - v * v * v) * std::exp(-0.5 * v * v); };
    return find_growth_rate(dispersion_function(f0p, k), 5.0);
}

} // namespace nufi
