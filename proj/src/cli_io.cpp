#include "nufi/cli_io.hpp"

#include "nufi/error.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace nufi {

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return s;
}

struct Entry {
    std::string value;
    int line = 0;
};

double parse_real(const Entry& e, const std::string& key) {
    const char* s = e.value.c_str();
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(s, &end);
    if (end == s || *end != '\0' || errno == ERANGE || !std::isfinite(x))
        throw ConfigError(key + ": expected a real number, got '" + e.value + "'", e.line);
    return x;
}

std::uint64_t parse_uint(const Entry& e, const std::string& key) {
    const std::string& v = e.value;
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'", e.line);
    errno = 0;
    const auto x = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE)
        throw ConfigError(key + ": integer out of range", e.line);
    return x;
}

bool parse_bool(const Entry& e, const std::string& key) {
    const auto v = lower(e.value);
    if (v == "true" || v == "yes" || v == "on" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "off" || v == "0")
        return false;
    throw ConfigError(key + ": expected true or false, got '" + e.value + "'", e.line);
}

std::vector<double> parse_list(const Entry& e, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            continue;
        out.push_back(parse_real(Entry{item, e.line}, key));
    }
    return out;
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> k{
        {"run", {"scenario", "mode", "dt", "steps", "t_end", "seed", "threads", "cadence"}},
        {"grid", {"nx", "nv"}},
        {"scenario", {"alpha", "k", "v0", "vmax", "drift", "t_e", "t_i", "mass_ratio", "length"}},
        {"restart", {"period", "max_rank", "tol", "oversampling", "power_iterations", "nx", "nv", "interpolation"}},
        {"options", {"quadrature", "track_velocity", "track_margin", "zero_field"}},
        {"output", {"dir", "heatmap_times", "heatmap_species", "heatmap_nx", "heatmap_nv", "heatmap_y",
                    "heatmap_v", "phi", "checkpoint"}},
    };
    return k;
}

} // namespace

// ---------------------------------------------------------------------------
// config

RunConfig RunSettings::to_run_config() const {
    RunConfig c = make_scenario(scenario, params);
    if (mode)
        c.mode = *mode;
    if (nx)
        set_spatial_count(c, *nx);
    if (nv)
        set_velocity_count(c, *nv);
    if (dt)
        c.dt = *dt;
    if (steps)
        c.steps = *steps;
    else if (t_end)
        c.steps = static_cast<std::size_t>(std::llround(*t_end / c.dt));
    if (restart_period)
        c.restart_period = *restart_period;
    if (max_rank) {
        c.untruncated = *max_rank == 0;
        if (*max_rank > 0)
            c.policy.max_rank = *max_rank;
    }
    c.policy.rel_tol = tol;
    c.policy.oversampling = oversampling;
    c.policy.power_iterations = power_iterations;
    if (restart_nx)
        c.restart_nx = *restart_nx;
    if (restart_nv)
        c.restart_nv = *restart_nv;
    if (interpolation)
        c.interpolation = *interpolation;
    c.seed = seed;
    c.threads = threads;
    c.cadence = cadence;
    if (quadrature)
        c.rule = *quadrature;
    if (track_velocity)
        c.tracking.enabled = *track_velocity;
    if (track_margin)
        c.tracking.margin = *track_margin;
    c.zero_field = zero_field;
    for (double t : heatmap_times) {
        HeatmapRequest h;
        h.time = t;
        h.species = heatmap_species;
        h.nx = heatmap_nx;
        h.nv = heatmap_nv;
        h.y = heatmap_y;
        h.v = heatmap_v;
        c.heatmaps.push_back(h);
    }
    c.validate();
    return c;
}

RunSettings parse_config(const std::string& text) {
    std::map<std::string, Entry> kv; // "section.key"
    std::istringstream in(text);
    std::string raw;
    std::string section = "run";
    int lineno = 0;
    const auto& known = known_keys();
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find_first_of("#;");
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("malformed section header '" + line + "'", lineno);
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (!known.count(section))
                throw ConfigError("unknown section [" + section + "]", lineno);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value', got '" + line + "'", lineno);
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        const auto& keys = known.at(section);
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown key '" + key + "' in [" + section + "]", lineno);
        if (value.empty())
            throw ConfigError("empty value for '" + key + "'", lineno);
        const std::string full = section + "." + key;
        if (kv.count(full))
            throw ConfigError("duplicate key '" + key + "' (first set on line " +
                                  std::to_string(kv[full].line) + ")",
                              lineno);
        kv[full] = Entry{value, lineno};
    }

    RunSettings s;
    auto has = [&](const char* k) { return kv.count(k) > 0; };
    auto real = [&](const char* k) { return parse_real(kv.at(k), k); };
    auto uint = [&](const char* k) { return parse_uint(kv.at(k), k); };
    auto flag = [&](const char* k) { return parse_bool(kv.at(k), k); };
    auto line_of = [&](const char* k) { return has(k) ? kv.at(k).line : 0; };
    auto positive = [&](const char* k) {
        const double x = real(k);
        if (!(x > 0.0))
            throw ConfigError(std::string(k) + " must be positive", line_of(k));
        return x;
    };
    auto at_least = [&](const char* k, std::uint64_t lo) {
        const auto x = uint(k);
        if (x < lo)
            throw ConfigError(std::string(k) + " must be at least " + std::to_string(lo), line_of(k));
        return x;
    };

    if (has("run.scenario")) {
        s.scenario = kv.at("run.scenario").value;
        const auto& names = scenario_names();
        if (std::find(names.begin(), names.end(), s.scenario) == names.end())
            throw ConfigError("unknown scenario '" + s.scenario + "'", line_of("run.scenario"));
    }
    if (has("run.mode")) {
        try {
            s.mode = parse_solver_mode(kv.at("run.mode").value);
        } catch (const UsageError& e) {
            throw ConfigError(e.what(), line_of("run.mode"));
        }
    }
    if (has("run.dt"))
        s.dt = positive("run.dt");
    if (has("run.steps"))
        s.steps = uint("run.steps");
    if (has("run.t_end")) {
        if (has("run.steps"))
            throw ConfigError("give either steps or t_end", line_of("run.t_end"));
        const double t = real("run.t_end");
        if (t < 0.0)
            throw ConfigError("run.t_end must be non-negative", line_of("run.t_end"));
        s.t_end = t;
    }
    if (has("run.seed"))
        s.seed = uint("run.seed");
    if (has("run.threads"))
        s.threads = int(uint("run.threads"));
    if (has("run.cadence"))
        s.cadence = at_least("run.cadence", 1);

    if (has("grid.nx"))
        s.nx = at_least("grid.nx", 2);
    if (has("grid.nv"))
        s.nv = at_least("grid.nv", 2);

    const std::pair<const char*, std::optional<double> ScenarioParams::*> sp[] = {
        {"scenario.alpha", &ScenarioParams::alpha}, {"scenario.k", &ScenarioParams::k},
        {"scenario.v0", &ScenarioParams::v0},       {"scenario.vmax", &ScenarioParams::vmax},
        {"scenario.drift", &ScenarioParams::drift}, {"scenario.t_e", &ScenarioParams::t_e},
        {"scenario.t_i", &ScenarioParams::t_i},     {"scenario.mass_ratio", &ScenarioParams::mass_ratio},
        {"scenario.length", &ScenarioParams::length}};
    for (const auto& [key, member] : sp) {
        if (!has(key))
            continue;
        const std::string k = key;
        const bool must_be_positive = k != "scenario.alpha" && k != "scenario.v0" && k != "scenario.drift";
        s.params.*member = must_be_positive ? positive(key) : real(key);
    }

    if (has("restart.period"))
        s.restart_period = at_least("restart.period", 1);
    if (has("restart.max_rank")) {
        const auto v = lower(kv.at("restart.max_rank").value);
        s.max_rank = (v == "none" || v == "full" || v == "inf") ? 0 : at_least("restart.max_rank", 1);
    }
    if (has("restart.tol")) {
        s.tol = real("restart.tol");
        if (!(s.tol > 0.0 && s.tol <= 1.0))
            throw ConfigError("restart.tol must lie in (0, 1]", line_of("restart.tol"));
    }
    if (has("restart.oversampling"))
        s.oversampling = at_least("restart.oversampling", 1);
    if (has("restart.power_iterations"))
        s.power_iterations = int(uint("restart.power_iterations"));
    if (has("restart.nx"))
        s.restart_nx = at_least("restart.nx", 2);
    if (has("restart.nv"))
        s.restart_nv = at_least("restart.nv", 2);
    if (has("restart.interpolation")) {
        try {
            s.interpolation = parse_interpolation(lower(kv.at("restart.interpolation").value));
        } catch (const UsageError& e) {
            throw ConfigError(e.what(), line_of("restart.interpolation"));
        }
    }

    if (has("options.quadrature")) {
        const auto v = lower(kv.at("options.quadrature").value);
        if (v == "trapezoid")
            s.quadrature = VelocityRule::trapezoid;
        else if (v == "uniform")
            s.quadrature = VelocityRule::uniform;
        else
            throw ConfigError("options.quadrature must be trapezoid or uniform", line_of("options.quadrature"));
    }
    if (has("options.track_velocity"))
        s.track_velocity = flag("options.track_velocity");
    if (has("options.track_margin")) {
        const double m = real("options.track_margin");
        if (m < 0.0)
            throw ConfigError("options.track_margin must be non-negative", line_of("options.track_margin"));
        s.track_margin = m;
    }
    if (has("options.zero_field"))
        s.zero_field = flag("options.zero_field");

    if (has("output.dir"))
        s.out = kv.at("output.dir").value;
    if (has("output.heatmap_times")) {
        s.heatmap_times = parse_list(kv.at("output.heatmap_times"), "output.heatmap_times");
        for (double t : s.heatmap_times)
            if (t < 0.0)
                throw ConfigError("heatmap times must be non-negative", line_of("output.heatmap_times"));
    }
    if (has("output.heatmap_species"))
        s.heatmap_species = uint("output.heatmap_species");
    if (has("output.heatmap_nx"))
        s.heatmap_nx = at_least("output.heatmap_nx", 2);
    if (has("output.heatmap_nv"))
        s.heatmap_nv = at_least("output.heatmap_nv", 2);
    if (has("output.heatmap_y"))
        s.heatmap_y = real("output.heatmap_y");
    if (has("output.heatmap_v"))
        s.heatmap_v = real("output.heatmap_v");
    if (has("output.phi"))
        s.write_phi = flag("output.phi");
    if (has("output.checkpoint"))
        s.checkpoint = flag("output.checkpoint");

    // cross-field constraints, reported against the most specific key
    try {
        const RunConfig rc = s.to_run_config();
        // an explicit rank cap must fit the restart grid even when the mode never compresses
        if (s.max_rank && *s.max_rank > 0) {
            std::size_t rows = 1;
            for (const auto& a : rc.spatial)
                rows *= rc.restart_nx > 0 ? rc.restart_nx : a.count;
            for (const auto& sp : rc.species) {
                std::size_t cols = 1;
                for (const auto& a : sp.velocity)
                    cols *= rc.restart_nv > 0 ? rc.restart_nv : a.count;
                if (*s.max_rank > std::min(rows, cols))
                    throw ConfigError("max_rank (" + std::to_string(*s.max_rank) +
                                          ") exceeds the restart grid dimensions (" + std::to_string(rows) + " x " +
                                          std::to_string(cols) + ")",
                                      line_of("restart.max_rank"));
            }
        }
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        const char* blame = "run.scenario";
        for (const char* k : {"restart.max_rank", "restart.period", "restart.nx", "restart.nv", "grid.nx",
                              "grid.nv", "output.heatmap_species", "run.dt"}) {
            const std::string word = std::string(k).substr(std::string(k).find('.') + 1);
            if (has(k) && msg.find(word) != std::string::npos) {
                blame = k;
                break;
            }
        }
        if (!has(blame) && has("restart.max_rank") && msg.find("max_rank") != std::string::npos)
            blame = "restart.max_rank";
        throw ConfigError(msg, line_of(blame));
    }
    return s;
}

RunSettings load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const RunSettings& s) {
    std::ostringstream o;
    o << "[run]\n";
    o << "scenario = " << s.scenario << "\n";
    if (s.mode)
        o << "mode = " << to_string(*s.mode) << "\n";
    if (s.dt)
        o << "dt = " << fmt17(*s.dt) << "\n";
    if (s.steps)
        o << "steps = " << *s.steps << "\n";
    if (s.t_end)
        o << "t_end = " << fmt17(*s.t_end) << "\n";
    o << "seed = " << s.seed << "\n";
    o << "threads = " << s.threads << "\n";
    o << "cadence = " << s.cadence << "\n";

    o << "\n[grid]\n";
    if (s.nx)
        o << "nx = " << *s.nx << "\n";
    if (s.nv)
        o << "nv = " << *s.nv << "\n";

    o << "\n[scenario]\n";
    const std::pair<const char*, const std::optional<double>*> sp[] = {
        {"alpha", &s.params.alpha}, {"k", &s.params.k},         {"v0", &s.params.v0},
        {"vmax", &s.params.vmax},   {"drift", &s.params.drift}, {"t_e", &s.params.t_e},
        {"t_i", &s.params.t_i},     {"mass_ratio", &s.params.mass_ratio}, {"length", &s.params.length}};
    for (const auto& [k, v] : sp)
        if (*v)
            o << k << " = " << fmt17(**v) << "\n";

    o << "\n[restart]\n";
    if (s.restart_period)
        o << "period = " << *s.restart_period << "\n";
    if (s.max_rank) {
        if (*s.max_rank == 0)
            o << "max_rank = none\n";
        else
            o << "max_rank = " << *s.max_rank << "\n";
    }
    o << "tol = " << fmt17(s.tol) << "\n";
    o << "oversampling = " << s.oversampling << "\n";
    o << "power_iterations = " << s.power_iterations << "\n";
    if (s.restart_nx)
        o << "nx = " << *s.restart_nx << "\n";
    if (s.restart_nv)
        o << "nv = " << *s.restart_nv << "\n";
    if (s.interpolation)
        o << "interpolation = " << to_string(*s.interpolation) << "\n";

    o << "\n[options]\n";
    if (s.quadrature)
        o << "quadrature = " << (*s.quadrature == VelocityRule::trapezoid ? "trapezoid" : "uniform") << "\n";
    if (s.track_velocity)
        o << "track_velocity = " << (*s.track_velocity ? "true" : "false") << "\n";
    if (s.track_margin)
        o << "track_margin = " << fmt17(*s.track_margin) << "\n";
    o << "zero_field = " << (s.zero_field ? "true" : "false") << "\n";

    o << "\n[output]\n";
    o << "dir = " << s.out << "\n";
    if (!s.heatmap_times.empty()) {
        o << "heatmap_times = ";
        for (std::size_t i = 0; i < s.heatmap_times.size(); ++i)
            o << (i ? ", " : "") << fmt17(s.heatmap_times[i]);
        o << "\n";
    }
    o << "heatmap_species = " << s.heatmap_species << "\n";
    if (s.heatmap_nx)
        o << "heatmap_nx = " << s.heatmap_nx << "\n";
    if (s.heatmap_nv)
        o << "heatmap_nv = " << s.heatmap_nv << "\n";
    o << "heatmap_y = " << fmt17(s.heatmap_y) << "\n";
    o << "heatmap_v = " << fmt17(s.heatmap_v) << "\n";
    o << "phi = " << (s.write_phi ? "true" : "false") << "\n";
    o << "checkpoint = " << (s.checkpoint ? "true" : "false") << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// time series

void write_timeseries(std::ostream& out, const std::vector<DiagnosticsRow>& rows) {
    out << kTimeseriesHeader << "\n";
    for (const auto& r : rows) {
        out << r.step;
        for (double x : {r.time, r.electric_energy, r.kinetic_energy, r.total_energy, r.entropy, r.l1_norm,
                         r.l2_norm, r.mass, r.min_f, r.max_f})
            out << "," << fmt17(x);
        out << "\n";
    }
    if (!out)
        throw IoError("failed writing time series");
}

void write_timeseries(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot write '" + path + "'");
    write_timeseries(f, rows);
}

std::vector<DiagnosticsRow> read_timeseries(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kTimeseriesHeader)
        throw IoError("time series header mismatch");
    std::vector<DiagnosticsRow> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 11)
            throw IoError("time series row has " + std::to_string(cells.size()) + " columns");
        DiagnosticsRow r;
        r.step = std::stoull(cells[0]);
        double* fields[] = {&r.time, &r.electric_energy, &r.kinetic_energy, &r.total_energy, &r.entropy,
                            &r.l1_norm, &r.l2_norm, &r.mass, &r.min_f, &r.max_f};
        for (int i = 0; i < 10; ++i)
            *fields[i] = std::strtod(cells[std::size_t(i) + 1].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

void write_species_series(const std::string& path, const RunConfig& cfg, const RunArtifacts& art) {
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot write '" + path + "'");
    f << "step,time,species,mass,inflow_flux,velocity_bound,velocity_count\n";
    for (std::size_t s = 0; s < art.species.size(); ++s) {
        const auto& ser = art.species[s];
        const std::size_t first = art.completed_steps - ser.mass.size();
        for (std::size_t i = 0; i < ser.mass.size(); ++i) {
            const std::size_t step = first + i;
            f << step << "," << fmt17(double(step) * cfg.dt) << "," << cfg.species[s].name << ","
              << fmt17(ser.mass[i]) << "," << fmt17(ser.inflow_flux[i]) << "," << fmt17(ser.velocity_bound[i])
              << "," << ser.velocity_count[i] << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// snapshots

namespace {

template <class T>
void put(std::ostream& o, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    o.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T)))
        throw IoError("snapshot file is truncated");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

void put_axis(std::ostream& o, const AxisSpec& a) {
    put<double>(o, a.min);
    put<double>(o, a.max);
    put<std::uint64_t>(o, a.count);
    put<std::uint32_t>(o, a.boundary == Boundary::periodic ? 0u : 1u);
}

AxisSpec get_axis(std::istream& in) {
    AxisSpec a;
    a.min = get<double>(in);
    a.max = get<double>(in);
    a.count = get<std::uint64_t>(in);
    const auto b = get<std::uint32_t>(in);
    if (b > 1)
        throw IoError("snapshot axis has unknown boundary code");
    a.boundary = b == 0 ? Boundary::periodic : Boundary::bounded;
    try {
        a.validate();
    } catch (const UsageError& e) {
        throw IoError(std::string("snapshot axis is invalid: ") + e.what());
    }
    return a;
}

} // namespace

void dump_snapshot(std::ostream& out, const LowRankSnapshot& s) {
    out.write("NFLR", 4);
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint64_t>(out, s.step());
    put<std::uint32_t>(out, std::uint32_t(s.species()));
    const auto& g = s.grid();
    put<std::uint32_t>(out, std::uint32_t(g.spatial_axes().size()));
    put<std::uint32_t>(out, std::uint32_t(g.velocity_axes().size()));
    for (const auto& a : g.spatial_axes())
        put_axis(out, a);
    for (const auto& a : g.velocity_axes())
        put_axis(out, a);
    const auto& f = s.factorization();
    const auto k = f.rank();
    put<std::uint64_t>(out, k);
    for (std::size_t r = 0; r < k; ++r)
        put<double>(out, f.singular_values[Eigen::Index(r)]);
    for (Eigen::Index i = 0; i < f.row_factor.size(); ++i)
        put<double>(out, f.row_factor.data()[i]);
    for (Eigen::Index i = 0; i < f.col_factor.size(); ++i)
        put<double>(out, f.col_factor.data()[i]);
    if (!out)
        throw IoError("failed writing snapshot");
}

void dump_snapshot(const std::string& path, const LowRankSnapshot& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write '" + path + "'");
    dump_snapshot(f, s);
}

std::shared_ptr<LowRankSnapshot> load_snapshot(std::istream& in, Interpolation interp) {
    char magic[4];
    if (!in.read(magic, 4))
        throw IoError("snapshot file is truncated");
    if (std::memcmp(magic, "NFLR", 4) != 0)
        throw IoError("not a snapshot file (bad magic)");
    const auto version = get<std::uint32_t>(in);
    if (version != kSnapshotVersion)
        throw IoError("unsupported snapshot version " + std::to_string(version));
    const auto step = get<std::uint64_t>(in);
    const auto species = get<std::uint32_t>(in);
    const auto ns = get<std::uint32_t>(in);
    const auto nv = get<std::uint32_t>(in);
    if (ns < 1 || ns > 2 || nv != ns)
        throw IoError("snapshot has unsupported dimensions");
    std::vector<AxisSpec> sa, va;
    for (std::uint32_t i = 0; i < ns; ++i)
        sa.push_back(get_axis(in));
    for (std::uint32_t i = 0; i < nv; ++i)
        va.push_back(get_axis(in));
    PhaseSpaceGrid grid(sa, va);
    const auto k = get<std::uint64_t>(in);
    const auto m = grid.spatial_count(), n = grid.velocity_count();
    if (k > std::min(m, n))
        throw IoError("snapshot rank exceeds its grid");
    Factorization f;
    f.singular_values.resize(Eigen::Index(k));
    for (std::size_t r = 0; r < k; ++r)
        f.singular_values[Eigen::Index(r)] = get<double>(in);
    f.row_factor.resize(Eigen::Index(m), Eigen::Index(k));
    for (Eigen::Index i = 0; i < f.row_factor.size(); ++i)
        f.row_factor.data()[i] = get<double>(in);
    f.col_factor.resize(Eigen::Index(n), Eigen::Index(k));
    for (Eigen::Index i = 0; i < f.col_factor.size(); ++i)
        f.col_factor.data()[i] = get<double>(in);
    const double support = factor_support(f, grid);
    return std::make_shared<LowRankSnapshot>(std::move(f), std::move(grid), step, int(species), support, interp);
}

std::shared_ptr<LowRankSnapshot> load_snapshot(const std::string& path, Interpolation interp) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open snapshot '" + path + "'");
    return load_snapshot(f, interp);
}

// ---------------------------------------------------------------------------
// potential history

void write_phi(std::ostream& out, const FieldHistory& h, std::size_t from) {
    out << "step,time";
    for (std::size_t k = 0; k < h.node_count(); ++k)
        out << ",phi_" << k;
    out << "\n";
    for (std::size_t s = std::max(from, h.first_step()); s < h.end_step(); ++s) {
        out << s << "," << fmt17(double(s) * h.dt());
        for (double p : h.entry(s))
            out << "," << fmt17(p);
        out << "\n";
    }
    if (!out)
        throw IoError("failed writing potential history");
}

void write_phi(const std::string& path, const FieldHistory& h, std::size_t from) {
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot write '" + path + "'");
    write_phi(f, h, from);
}

FieldHistory read_phi(std::istream& in, const std::vector<AxisSpec>& axes, double dt) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,time", 0) != 0)
        throw IoError("potential file header mismatch");
    std::optional<FieldHistory> h;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const std::size_t step = std::stoull(cell);
        std::getline(ss, cell, ',');
        PotentialCoefficients phi;
        while (std::getline(ss, cell, ','))
            phi.push_back(std::strtod(cell.c_str(), nullptr));
        if (!h)
            h.emplace(axes, dt, step);
        if (step != h->end_step())
            throw IoError("potential file skips from step " + std::to_string(h->end_step()) + " to " +
                          std::to_string(step));
        if (phi.size() != h->node_count())
            throw IoError("potential row at step " + std::to_string(step) + " has wrong length");
        h->append(step, std::move(phi));
    }
    if (!h)
        throw IoError("potential file holds no steps");
    return std::move(*h);
}

FieldHistory read_phi(const std::string& path, const std::vector<AxisSpec>& axes, double dt) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open '" + path + "'");
    return read_phi(f, axes, dt);
}

// ---------------------------------------------------------------------------
// heatmaps

void export_heatmap(const std::string& path, const HeatmapFrame& fr) {
    {
        std::ofstream f(path);
        if (!f)
            throw IoError("cannot write '" + path + "'");
        for (Eigen::Index i = 0; i < fr.values.rows(); ++i) {
            for (Eigen::Index j = 0; j < fr.values.cols(); ++j)
                f << (j ? "," : "") << fmt17(fr.values(i, j));
            f << "\n";
        }
        if (!f)
            throw IoError("failed writing '" + path + "'");
    }
    std::ofstream m(path + ".meta");
    if (!m)
        throw IoError("cannot write '" + path + ".meta'");
    m << "x_min=" << fmt17(fr.x_axis.min) << " x_max=" << fmt17(fr.x_axis.max) << " nx=" << fr.x_axis.count
      << " x_periodic=" << (fr.x_axis.boundary == Boundary::periodic ? 1 : 0) << " v_min=" << fmt17(fr.v_axis.min)
      << " v_max=" << fmt17(fr.v_axis.max) << " nv=" << fr.v_axis.count << " time=" << fmt17(fr.time)
      << " step=" << fr.step << " species=" << fr.request.species << " slice_y=" << fmt17(fr.request.y)
      << " slice_v=" << fmt17(fr.request.v) << "\n";
}

// ---------------------------------------------------------------------------
// checkpoints

void write_checkpoint(const std::string& dir, std::size_t step,
                      const std::vector<std::shared_ptr<const GridDistribution>>& snapshots,
                      const FieldHistory& history, const std::vector<double>& bounds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t s = 0; s < snapshots.size(); ++s) {
        const auto* lr = dynamic_cast<const LowRankSnapshot*>(snapshots[s].get());
        if (!lr)
            throw UsageError("checkpoints need low-rank snapshots");
        dump_snapshot((fs::path(dir) / ("snapshot_s" + std::to_string(s) + ".nflr")).string(), *lr);
    }
    write_phi((fs::path(dir) / "checkpoint_phi.csv").string(), history, step);
    std::ofstream f(fs::path(dir) / "checkpoint.txt");
    if (!f)
        throw IoError("cannot write checkpoint in '" + dir + "'");
    f << "step " << step << "\nspecies " << snapshots.size() << "\nbounds";
    for (double b : bounds)
        f << " " << fmt17(b);
    f << "\n";
}

ResumeState read_checkpoint(const std::string& dir, const RunConfig& cfg) {
    namespace fs = std::filesystem;
    std::ifstream f(fs::path(dir) / "checkpoint.txt");
    if (!f)
        throw IoError("no checkpoint in '" + dir + "'");
    std::string word;
    std::size_t step = 0, nspecies = 0;
    f >> word >> step;
    if (word != "step")
        throw IoError("malformed checkpoint.txt");
    f >> word >> nspecies;
    if (word != "species" || nspecies != cfg.species.size())
        throw IoError("checkpoint species count does not match the configuration");
    f >> word;
    if (word != "bounds")
        throw IoError("malformed checkpoint.txt");
    ResumeState r;
    for (std::size_t s = 0; s < nspecies; ++s) {
        double b;
        if (!(f >> b))
            throw IoError("checkpoint lacks velocity bounds");
        r.velocity_bounds.push_back(b);
    }
    for (std::size_t s = 0; s < nspecies; ++s) {
        auto snap = load_snapshot((fs::path(dir) / ("snapshot_s" + std::to_string(s) + ".nflr")).string(),
                                  cfg.interpolation);
        if (snap->step() != step)
            throw IoError("snapshot step does not match the checkpoint");
        r.sources.push_back(std::move(snap));
    }
    r.history = read_phi((fs::path(dir) / "checkpoint_phi.csv").string(), cfg.spatial, cfg.dt);
    if (r.history.first_step() != step)
        throw IoError("checkpoint potential does not start at the snapshot step");
    r.next_step = r.history.end_step();
    return r;
}

} // namespace nufi
