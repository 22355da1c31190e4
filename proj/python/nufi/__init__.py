"""Vlasov-Poisson solvers by numerical flow iteration, with low-rank restarts."""

from ._nufi import (
    ConfigError,
    IoError,
    NumericalError,
    Settings,
    UsageError,
    cold_beam_growth_rate,
    dispersion_growth_rate,
    f0_landau,
    f0_two_stream_1d,
    fit_growth_rate,
    load_config,
    parse_config,
    run,
    run_scenario,
    scenario_names,
)

__all__ = [
    "ConfigError",
    "IoError",
    "NumericalError",
    "Settings",
    "UsageError",
    "cold_beam_growth_rate",
    "dispersion_growth_rate",
    "f0_landau",
    "f0_two_stream_1d",
    "fit_growth_rate",
    "load_config",
    "parse_config",
    "run",
    "run_scenario",
    "scenario_names",
]
