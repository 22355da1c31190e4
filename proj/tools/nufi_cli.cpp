// nufi: command-line driver for the NuFI / NuFI-LR solvers.

#include "nufi/cli_io.hpp"
#include "nufi/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace nufi;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kNumerical = 3 };

struct Overrides {
    std::string config, scenario, mode, max_rank, out, resume, interpolation;
    std::optional<std::size_t> period, steps, nx, nv;
    std::optional<double> tol, t_end;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool checkpoint = false, phi = false, quiet = false;
};

RunSettings settings_from(const Overrides& o) {
    RunSettings s;
    if (!o.config.empty())
        s = load_config(o.config);
    if (!o.scenario.empty()) {
        if (!o.config.empty())
            throw UsageError("give either --config or --scenario");
        s.scenario = o.scenario;
    }
    if (!o.mode.empty())
        s.mode = parse_solver_mode(o.mode);
    if (o.period) {
        if (*o.period == 0)
            throw UsageError("--restart-period must be at least 1");
        s.restart_period = *o.period;
    }
    if (!o.max_rank.empty()) {
        if (o.max_rank == "none" || o.max_rank == "full" || o.max_rank == "inf") {
            s.max_rank = 0;
        } else {
            std::size_t pos = 0;
            const auto k = std::stoull(o.max_rank, &pos);
            if (pos != o.max_rank.size() || k == 0)
                throw UsageError("--max-rank takes a positive integer or 'none'");
            s.max_rank = k;
        }
    }
    if (!o.interpolation.empty())
        s.interpolation = parse_interpolation(o.interpolation);
    if (o.tol) {
        if (!(*o.tol > 0.0 && *o.tol <= 1.0))
            throw UsageError("--tol must lie in (0, 1]");
        s.tol = *o.tol;
    }
    if (o.seed)
        s.seed = *o.seed;
    if (o.threads)
        s.threads = *o.threads;
    if (!o.out.empty())
        s.out = o.out;
    if (o.steps) {
        s.steps = *o.steps;
        s.t_end.reset();
    }
    if (o.t_end) {
        s.t_end = *o.t_end;
        s.steps.reset();
    }
    if (o.nx)
        s.nx = *o.nx;
    if (o.nv)
        s.nv = *o.nv;
    if (o.checkpoint)
        s.checkpoint = true;
    if (o.phi)
        s.write_phi = true;
    return s;
}

std::string heatmap_name(const HeatmapFrame& f) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "heatmap_s%zu_step%06zu.csv", f.request.species, f.step);
    return buf;
}

int do_run(const Overrides& o) {
    const RunSettings settings = settings_from(o);
    RunConfig cfg = settings.to_run_config();
    fs::create_directories(settings.out);
    const fs::path out = settings.out;
    {
        std::ofstream f(out / "config.ini");
        f << format_config(settings);
    }

    std::optional<ResumeState> resume;
    if (!o.resume.empty())
        resume = read_checkpoint(o.resume, cfg);

    const bool can_checkpoint = cfg.compression() != Compression::none && cfg.effective_period() > 0;
    if (settings.checkpoint && !can_checkpoint)
        std::cerr << "nufi: checkpoints need a low-rank mode with compression; none will be written\n";
    if (settings.checkpoint && can_checkpoint) {
        const std::string dir = (out / "checkpoint").string();
        cfg.on_restart = [dir](std::size_t step, const auto& sources, const FieldHistory& h,
                               const std::vector<double>& bounds) { write_checkpoint(dir, step, sources, h, bounds); };
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t every = std::max<std::size_t>(1, cfg.steps / 20);
    if (!o.quiet) {
        cfg.on_step = [&](const DiagnosticsRow& r) {
            if (r.step % every == 0 || r.step + 1 == cfg.steps) {
                const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::fprintf(stderr, "step %6zu  t=%8.3f  E_el=%.6e  E_tot=%.10e  [%.1fs]\n", r.step, r.time,
                             r.electric_energy, r.total_energy, el);
            }
            return true;
        };
    }

    if (!o.quiet)
        std::fprintf(stderr, "nufi: %s, mode %s, %zu steps of %g\n", cfg.scenario.c_str(),
                     to_string(cfg.mode).c_str(), cfg.steps, cfg.dt);
    RunArtifacts art = run(cfg, resume ? &*resume : nullptr);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_timeseries((out / "timeseries.csv").string(), art.rows);
    write_species_series((out / "species.csv").string(), cfg, art);
    if (settings.write_phi)
        write_phi((out / "phi.csv").string(), art.history);
    for (const auto& h : art.heatmaps)
        export_heatmap((out / heatmap_name(h)).string(), h);

    nlohmann::json summary;
    summary["scenario"] = cfg.scenario;
    summary["mode"] = to_string(cfg.mode);
    summary["steps"] = art.completed_steps;
    summary["dt"] = cfg.dt;
    summary["seconds"] = seconds;
    summary["density_micro_steps"] = art.density_work.verlet_micro_steps;
    summary["snapshot_micro_steps"] = art.snapshot_work.verlet_micro_steps;
    summary["f_evaluations"] = art.density_work.f_evaluations + art.snapshot_work.f_evaluations;
    summary["snapshot_builds"] = art.snapshot_builds;
    summary["snapshot_ranks"] = art.snapshot_ranks;
    summary["field_history_reals"] = art.history.stored_reals();
    for (std::size_t s = 0; s < art.species.size(); ++s) {
        summary["species"][s]["name"] = cfg.species[s].name;
        summary["species"][s]["reflections"] = art.species[s].reflections;
        summary["species"][s]["max_abs_rho"] = art.species[s].max_abs_rho;
    }
    std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
    if (!o.quiet)
        std::fprintf(stderr, "nufi: done in %.1fs, output in %s\n", seconds, settings.out.c_str());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"NuFI / NuFI-LR Vlasov-Poisson solver"};
    app.require_subcommand(1);
    Overrides o;

    auto* run_cmd = app.add_subcommand("run", "run a simulation");
    auto* cfg_opt = run_cmd->add_option("--config", o.config, "config file")->check(CLI::ExistingFile);
    run_cmd->add_option("--scenario", o.scenario, "preset name")->excludes(cfg_opt);
    run_cmd->add_option("--mode", o.mode, "nufi | nufi_lr | sl | sl_lr");
    run_cmd->add_option("--restart-period", o.period, "steps between restarts");
    run_cmd->add_option("--max-rank", o.max_rank, "rank cap, or 'none' for untruncated");
    run_cmd->add_option("--tol", o.tol, "relative singular value cutoff");
    run_cmd->add_option("--interpolation", o.interpolation, "linear | cubic, between restart-grid nodes");
    run_cmd->add_option("--seed", o.seed, "RSVD seed");
    run_cmd->add_option("--threads", o.threads, "worker threads (0: all)");
    run_cmd->add_option("--out", o.out, "output directory");
    run_cmd->add_option("--steps", o.steps, "number of steps");
    run_cmd->add_option("--t-end", o.t_end, "final time (alternative to --steps)");
    run_cmd->add_option("--nx", o.nx, "spatial nodes per axis");
    run_cmd->add_option("--nv", o.nv, "velocity nodes per axis");
    run_cmd->add_option("--resume", o.resume, "checkpoint directory to continue from")->check(CLI::ExistingDirectory);
    run_cmd->add_flag("--checkpoint", o.checkpoint, "write a checkpoint at every restart");
    run_cmd->add_flag("--phi", o.phi, "write the potential history");
    run_cmd->add_flag("-q,--quiet", o.quiet, "no progress output");

    auto* list_cmd = app.add_subcommand("scenarios", "list preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*list_cmd) {
            for (const auto& n : scenario_names())
                std::cout << n << "\n";
            return kOk;
        }
        if (o.config.empty() && o.scenario.empty()) {
            std::cerr << "nufi: run needs --config or --scenario\n";
            return kConfig;
        }
        return do_run(o);
    } catch (const ConfigError& e) {
        std::cerr << "nufi: config error: " << e.what() << "\n";
        return kConfig;
    } catch (const UsageError& e) {
        std::cerr << "nufi: invalid settings: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "nufi: invalid argument: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "nufi: numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "nufi: " << e.what() << "\n";
        return kIo;
    }
}
