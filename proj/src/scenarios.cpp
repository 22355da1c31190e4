#include "nufi/scenarios.hpp"

#include "nufi/error.hpp"

#include <cmath>
#include <numbers>

namespace nufi {

namespace {

constexpr double kPi = std::numbers::pi;

double inv_sqrt_2pi() {
    return 1.0 / std::sqrt(2.0 * kPi);
}

} // namespace

double f0_two_stream_1d(double x, double v, double alpha, double k) {
    return inv_sqrt_2pi() * (1.0 + alpha * std::cos(k * x)) * v * v * std::exp(-0.5 * v * v);
}

double f0_two_stream_2d(double x, double y, double u, double v, double alpha, double k, double v0) {
    const double gu = std::exp(-0.5 * (u - v0) * (u - v0)) + std::exp(-0.5 * (u + v0) * (u + v0));
    const double gv = std::exp(-0.5 * (v - v0) * (v - v0)) + std::exp(-0.5 * (v + v0) * (v + v0));
    return (1.0 + alpha * (std::cos(k * x) + std::cos(k * y))) * gu * gv / (8.0 * kPi);
}

double f0_maxwellian_drift(double v, double T, double m, double u_s) {
    if (!(T > 0.0) || !(m > 0.0))
        throw UsageError("Maxwellian needs positive temperature and mass");
    const double vth = std::sqrt(T / m);
    const double z = (v - u_s) / vth;
    return inv_sqrt_2pi() / vth * std::exp(-0.5 * z * z);
}

double f0_landau(double x, double v, double alpha, double k) {
    return inv_sqrt_2pi() * (1.0 + alpha * std::cos(k * x)) * std::exp(-0.5 * v * v);
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"two_stream_1d", "two_stream_2d", "landau", "shock"};
    return names;
}

RunConfig two_stream_1d_preset(const ScenarioParams& p) {
    const double alpha = p.alpha.value_or(0.01);
    const double k = p.k.value_or(0.5);
    const double vmax = p.vmax.value_or(6.0);
    RunConfig c;
    c.scenario = "two_stream_1d";
    c.spatial = {AxisSpec::periodic(0.0, 2.0 * kPi / k, 256)};
    SpeciesConfig e;
    e.name = "electrons";
    e.f0 = [alpha, k](const Coords& x, const Coords& v) { return f0_two_stream_1d(x[0], v[0], alpha, k); };
    e.background = 1.0;
    e.velocity = {AxisSpec::bounded(-vmax, vmax, 256)};
    c.species = {e};
    c.dt = 0.1;
    c.steps = 1000;
    c.restart_period = 100;
    c.policy.max_rank = 20;
    return c;
}

RunConfig two_stream_2d_preset(const ScenarioParams& p) {
    const double alpha = p.alpha.value_or(1e-3);
    const double k = p.k.value_or(0.2);
    const double v0 = p.v0.value_or(2.4);
    const double vmax = p.vmax.value_or(v0 + 6.0);
    RunConfig c;
    c.scenario = "two_stream_2d";
    const double L = 2.0 * kPi / k;
    c.spatial = {AxisSpec::periodic(0.0, L, 128), AxisSpec::periodic(0.0, L, 128)};
    SpeciesConfig e;
    e.name = "electrons";
    e.f0 = [alpha, k, v0](const Coords& x, const Coords& v) {
        return f0_two_stream_2d(x[0], x[1], v[0], v[1], alpha, k, v0);
    };
    e.background = 1.0;
    e.velocity = {AxisSpec::bounded(-vmax, vmax, 128), AxisSpec::bounded(-vmax, vmax, 128)};
    c.species = {e};
    c.dt = 0.1;
    c.steps = 500;
    c.restart_period = 50;
    c.policy.max_rank = 20;
    return c;
}

RunConfig landau_preset(const ScenarioParams& p) {
    const double alpha = p.alpha.value_or(0.01);
    const double k = p.k.value_or(0.5);
    const double vmax = p.vmax.value_or(6.0);
    RunConfig c;
    c.scenario = "landau";
    c.spatial = {AxisSpec::periodic(0.0, 2.0 * kPi / k, 128)};
    SpeciesConfig e;
    e.name = "electrons";
    e.f0 = [alpha, k](const Coords& x, const Coords& v) { return f0_landau(x[0], v[0], alpha, k); };
    e.background = 1.0;
    e.velocity = {AxisSpec::bounded(-vmax, vmax, 128)};
    c.species = {e};
    c.dt = 0.1;
    c.steps = 500;
    c.restart_period = 50;
    c.policy.max_rank = 20;
    return c;
}

RunConfig shock_preset(const ScenarioParams& p) {
    const double us = p.drift.value_or(0.4);
    const double te = p.t_e.value_or(11475.0);
    const double ti = p.t_i.value_or(10.0);
    const double mr = p.mass_ratio.value_or(1836.0);
    const double L = p.length.value_or(200.0);
    RunConfig c;
    c.scenario = "shock";
    c.spatial = {AxisSpec::bounded(-L, 0.0, 1024)};
    c.boundary = {LeftBoundary::open_inflow, RightBoundary::reflecting_wall, 8};

    SpeciesConfig e;
    e.name = "electrons";
    e.charge = -1.0;
    e.mass = 1.0;
    e.f0 = [te](const Coords&, const Coords& v) { return f0_maxwellian_drift(v[0], te, 1.0, 0.0); };
    e.inflow = [te](double v) { return f0_maxwellian_drift(v, te, 1.0, 0.0); };
    const double ve = 6.0 * std::sqrt(te);
    e.velocity = {AxisSpec::bounded(-ve, ve, 64)};

    SpeciesConfig i;
    i.name = "ions";
    i.charge = 1.0;
    i.mass = mr;
    i.f0 = [ti, mr, us](const Coords&, const Coords& v) { return f0_maxwellian_drift(v[0], ti, mr, us); };
    i.inflow = [ti, mr, us](double v) { return f0_maxwellian_drift(v, ti, mr, us); };
    const double vi = std::abs(us) + 6.0 * std::sqrt(ti / mr);
    i.velocity = {AxisSpec::bounded(-vi, vi, 64)};

    c.species = {e, i};
    c.dt = 0.1;
    c.steps = 10000;
    c.mode = SolverMode::nufi_lr;
    c.restart_period = 50;
    c.restart_nx = 1024;
    c.restart_nv = 1024;
    c.policy.max_rank = 20;
    c.policy.rel_tol = 1e-3;
    c.tracking = {true, 0.1, 64};
    return c;
}

RunConfig make_scenario(const std::string& name, const ScenarioParams& params) {
    if (name == "two_stream_1d")
        return two_stream_1d_preset(params);
    if (name == "two_stream_2d")
        return two_stream_2d_preset(params);
    if (name == "landau")
        return landau_preset(params);
    if (name == "shock")
        return shock_preset(params);
    throw UsageError("unknown scenario '" + name + "' (two_stream_1d, two_stream_2d, landau, shock)");
}

void set_velocity_count(RunConfig& cfg, std::size_t count) {
    for (auto& s : cfg.species)
        for (auto& a : s.velocity)
            a.count = count;
}

void set_spatial_count(RunConfig& cfg, std::size_t count) {
    for (auto& a : cfg.spatial)
        a.count = count;
}

} // namespace nufi
