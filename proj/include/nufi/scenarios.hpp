#pragma once

#include "nufi/simulation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nufi {

double f0_two_stream_1d(double x, double v, double alpha = 0.01, double k = 0.5);
double f0_two_stream_2d(double x, double y, double u, double v, double alpha = 1e-3, double k = 0.2,
                        double v0 = 2.4);
/// Unit-density Maxwellian with thermal speed √(T/m) centred at u_s.
double f0_maxwellian_drift(double v, double T, double m, double u_s);
double f0_landau(double x, double v, double alpha = 0.01, double k = 0.5);

/// Physical parameters a preset may take from the config file.
struct ScenarioParams {
    std::optional<double> alpha, k, v0, vmax;
    // shock
    std::optional<double> drift, t_e, t_i, mass_ratio, length;

    bool operator==(const ScenarioParams&) const = default;
};

/// Names accepted by make_scenario.
const std::vector<std::string>& scenario_names();

/// Fully parameterized run configuration for a named experiment. Grid, time
/// and solver fields can be overridden afterwards.
RunConfig make_scenario(const std::string& name, const ScenarioParams& params = {});

RunConfig two_stream_1d_preset(const ScenarioParams& params = {});
RunConfig two_stream_2d_preset(const ScenarioParams& params = {});
RunConfig landau_preset(const ScenarioParams& params = {});
RunConfig shock_preset(const ScenarioParams& params = {});

/// Sets the node count of every species' velocity axes (extents unchanged).
void set_velocity_count(RunConfig& cfg, std::size_t count);
void set_spatial_count(RunConfig& cfg, std::size_t count);

} // namespace nufi
