#include "nufi/cli_io.hpp"
#include "nufi/diagnostics.hpp"
#include "nufi/error.hpp"
#include "nufi/scenarios.hpp"
#include "nufi/simulation.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace nufi;

namespace {

py::array_t<double> column(const std::vector<DiagnosticsRow>& rows, double DiagnosticsRow::*field) {
    py::array_t<double> out(py::ssize_t(rows.size()));
    auto a = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < rows.size(); ++i)
        a(py::ssize_t(i)) = rows[i].*field;
    return out;
}

py::array_t<double> vec(const std::vector<double>& v) {
    return py::array_t<double>(py::ssize_t(v.size()), v.data());
}

py::dict to_dict(const RunConfig& cfg, const RunArtifacts& art) {
    py::dict d;
    std::vector<double> steps;
    for (const auto& r : art.rows)
        steps.push_back(double(r.step));
    d["step"] = vec(steps);
    d["time"] = column(art.rows, &DiagnosticsRow::time);
    d["electric_energy"] = column(art.rows, &DiagnosticsRow::electric_energy);
    d["kinetic_energy"] = column(art.rows, &DiagnosticsRow::kinetic_energy);
    d["total_energy"] = column(art.rows, &DiagnosticsRow::total_energy);
    d["entropy"] = column(art.rows, &DiagnosticsRow::entropy);
    d["l1_norm"] = column(art.rows, &DiagnosticsRow::l1_norm);
    d["l2_norm"] = column(art.rows, &DiagnosticsRow::l2_norm);
    d["mass"] = column(art.rows, &DiagnosticsRow::mass);
    d["min_f"] = column(art.rows, &DiagnosticsRow::min_f);
    d["max_f"] = column(art.rows, &DiagnosticsRow::max_f);

    py::list species;
    for (std::size_t s = 0; s < art.species.size(); ++s) {
        const auto& ser = art.species[s];
        py::dict e;
        e["name"] = cfg.species[s].name;
        e["mass"] = vec(ser.mass);
        e["inflow_flux"] = vec(ser.inflow_flux);
        e["velocity_bound"] = vec(ser.velocity_bound);
        e["max_abs_rho"] = ser.max_abs_rho;
        e["reflections"] = ser.reflections;
        species.append(e);
    }
    d["species"] = species;

    if (!art.rho.empty()) {
        const std::size_t n = art.rho.size(), m = art.rho.front().size();
        py::array_t<double> rho({py::ssize_t(n), py::ssize_t(m)});
        auto r = rho.mutable_unchecked<2>();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k)
                r(py::ssize_t(i), py::ssize_t(k)) = art.rho[i][k];
        d["rho"] = rho;
    }
    py::list maps;
    for (const auto& h : art.heatmaps) {
        py::dict e;
        e["time"] = h.time;
        e["step"] = h.step;
        e["values"] = py::array_t<double>({h.values.rows(), h.values.cols()}, h.values.data());
        maps.append(e);
    }
    d["heatmaps"] = maps;
    d["density_work"] = art.density_work.verlet_micro_steps;
    d["snapshot_work"] = art.snapshot_work.verlet_micro_steps;
    d["snapshot_builds"] = art.snapshot_builds;
    d["snapshot_ranks"] = art.snapshot_ranks;
    d["stored_reals"] = art.history.stored_reals();
    d["completed_steps"] = art.completed_steps;
    return d;
}

py::dict run_settings(const RunSettings& s, bool record_rho) {
    RunConfig cfg = s.to_run_config();
    cfg.record_rho = record_rho;
    RunArtifacts art;
    {
        py::gil_scoped_release release;
        art = run(cfg);
    }
    return to_dict(cfg, art);
}

} // namespace

PYBIND11_MODULE(_nufi, m) {
    m.doc() = "Numerical-flow-iteration Vlasov-Poisson solvers";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<RunSettings>(m, "Settings")
        .def_property_readonly("scenario", [](const RunSettings& s) { return s.scenario; })
        .def("text", &format_config, "Canonical config text")
        .def("__eq__", [](const RunSettings& a, const RunSettings& b) { return a == b; })
        .def("__repr__", [](const RunSettings& s) { return "<nufi.Settings " + s.scenario + ">"; });

    m.def("parse_config", &parse_config, py::arg("text"));
    m.def("load_config", &load_config, py::arg("path"));
    m.def("scenario_names", &scenario_names);

    m.def("run", &run_settings, py::arg("settings"), py::arg("record_rho") = false,
          "Run a parsed configuration; returns diagnostics as numpy arrays");
    m.def(
        "run_scenario",
        [](const std::string& scenario, const std::string& mode, std::size_t nx, std::size_t nv,
           std::optional<std::size_t> steps, std::optional<double> t_end, std::optional<std::size_t> restart_period,
           std::optional<std::size_t> max_rank, std::uint64_t seed, bool zero_field, bool record_rho) {
            RunSettings s;
            s.scenario = scenario;
            s.mode = parse_solver_mode(mode);
            if (nx)
                s.nx = nx;
            if (nv)
                s.nv = nv;
            s.steps = steps;
            s.t_end = t_end;
            s.restart_period = restart_period;
            s.max_rank = max_rank;
            s.seed = seed;
            s.zero_field = zero_field;
            return run_settings(s, record_rho);
        },
        py::arg("scenario"), py::arg("mode") = "nufi", py::arg("nx") = 0, py::arg("nv") = 0,
        py::arg("steps") = py::none(), py::arg("t_end") = py::none(), py::arg("restart_period") = py::none(),
        py::arg("max_rank") = py::none(), py::arg("seed") = 0, py::arg("zero_field") = false,
        py::arg("record_rho") = false);

    m.def("f0_two_stream_1d", py::vectorize([](double x, double v) { return f0_two_stream_1d(x, v); }));
    m.def("f0_landau", py::vectorize([](double x, double v) { return f0_landau(x, v); }));
    m.def("dispersion_growth_rate", &dispersion_growth_rate, py::arg("k") = 0.5);
    m.def("cold_beam_growth_rate", &cold_beam_growth_rate, py::arg("a"), py::arg("k"));
    m.def(
        "fit_growth_rate",
        [](std::vector<double> t, std::vector<double> e, double t0, double t1) {
            return fit_growth_rate(t, e, t0, t1);
        },
        py::arg("time"), py::arg("electric_energy"), py::arg("t0"), py::arg("t1"));
}
