#pragma once

#include "nufi/flow.hpp"

#include <functional>
#include <span>
#include <vector>

namespace nufi {

struct DiagnosticsRow {
    std::size_t step = 0;
    double time = 0.0;
    double electric_energy = 0.0;
    double kinetic_energy = 0.0;
    double total_energy = 0.0;
    double entropy = 0.0;
    double l1_norm = 0.0;
    double l2_norm = 0.0;
    double mass = 0.0;
    double min_f = 0.0;
    double max_f = 0.0;
};

/// ½∫|E|² for the piecewise-linear potential with nodal values `phi`.
/// 1D: E is constant per cell. 2D: the x (y) partial is linear in y (x) on a
/// cell, integrated exactly.
double electric_energy(const std::vector<AxisSpec>& spatial_axes, std::span<const double> phi);
double electric_energy(const FieldHistory& history, std::size_t step);

/// Phase-space integrals of one species (or their sum over species).
struct PhaseIntegrals {
    double kinetic_energy = 0.0;
    double entropy = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double mass = 0.0;
    double min_f = 0.0;
    double max_f = 0.0;
};

/// Kinetic energy ½ m ∫∫ |v|² f per species from assembled moments. When the
/// moments were taken at velocity-shifted samples (half-step skip) the shift
/// dt/2 qm E(t_step, x_k) is undone here, so the history must hold `step`.
std::vector<double> species_kinetic_energy(const DensityResult& density, const FieldHistory& history,
                                           std::size_t step, std::span<const SpeciesInput> species);

/// Sum of all species' integrals (min/max taken over species).
PhaseIntegrals combine_integrals(const DensityResult& density, const FieldHistory& history, std::size_t step,
                                 std::span<const SpeciesInput> species);

/// One evaluation sweep at `at_step` without the half-step skip.
PhaseIntegrals kinetic_energy_entropy_norms(std::size_t at_step, const FieldHistory& history,
                                            std::span<const SpeciesInput> species,
                                            const DensityOptions& opts = {});

/// Least-squares slope of ln(energy) over t in [t0, t1], halved (field
/// amplitude rate for energy ~ exp(2 γ t)).
double fit_growth_rate(std::span<const double> time, std::span<const double> energy, double t0, double t1);

/// Locates the root γ > 0 of a real dispersion function D(γ) by scanning
/// (0, gamma_max] for a sign change and bisecting. Throws NumericalError when
/// there is none.
double find_growth_rate(const std::function<double(double)>& dispersion, double gamma_max = 5.0);

/// D(γ) = 1 - (1/k²) ∫ f0'(v) / (v - iγ/k) dv for an even f0, which is real:
/// 1 - (1/k²) ∫ v f0'(v) / (v² + γ²/k²) dv. Composite Simpson on [vmin, vmax].
std::function<double(double)> dispersion_function(std::function<double(double)> f0_prime, double k,
                                                  double vmin = -12.0, double vmax = 12.0,
                                                  std::size_t intervals = 24000);

/// Same relation for two cold beams ½[δ(v-a) + δ(v+a)]:
/// D(γ) = 1 - (k²a² - γ²) / (k²a² + γ²)².
std::function<double(double)> cold_beam_dispersion(double a, double k);

/// Closed form of the cold-beam root: γ² = (√(1 + 8k²a²) - 1 - 2k²a²) / 2.
double cold_beam_growth_rate(double a, double k);

/// Unstable root for the spatially uniform part of the 1D two-stream
/// equilibrium v² exp(-v²/2)/√(2π) at wave number k.
double dispersion_growth_rate(double k = 0.5);

} // namespace nufi
