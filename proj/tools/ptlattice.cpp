// Command-line front end: run scenarios, prepare ground states, compare against the
// two-mode model, dump momentum spectra and sweep a parameter.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptlattice/errors.hpp"
#include "ptlattice/ground_state.hpp"
#include "ptlattice/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ptlattice;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBlowUp = 3;

struct Overrides {
    double dt = 0.0;
    double t_end = 0.0;
    std::string out;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ScenarioConfig configure(const json& j, const Overrides& o) {
    ScenarioConfig c = parse_config(j);
    if (o.dt > 0.0) c.dt = o.dt;
    if (o.t_end > 0.0) c.t_end = o.t_end;
    if (!o.out.empty()) c.output_directory = o.out;
    validate(c);
    return c;
}

std::string output_path(const ScenarioConfig& c, const std::string& name) {
    fs::create_directories(c.output_directory);
    return (fs::path(c.output_directory) / name).string();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int exit_code(const RunRecord& r) { return r.termination == Termination::blow_up ? kExitBlowUp : kExitOk; }

void report(std::ostream& os, const RunRecord& r) {
    os << "termination: " << to_string(r.termination);
    if (r.empty_well) os << " (well " << *r.empty_well + 1 << ")";
    os << "\nend time: " << fmt(r.end_time) << "\n";
    if (!r.message.empty()) os << "message: " << r.message << "\n";
    os << "max |r1|, |r2|, |r4|: " << fmt(r.summary.max_r1) << ", " << fmt(r.summary.max_r2) << ", "
       << fmt(r.summary.max_r4) << "\n";
    os << "max relative determinant error: " << fmt(r.summary.max_det_relative_error) << "\n";
    os << "max relative norm drift: " << fmt(r.summary.max_norm_drift) << "\n";
}

int cmd_run(const std::string& path, const Overrides& o) {
    const ScenarioConfig c = configure(read_json(path), o);
    const RunRecord r = run(c);
    const std::string csv = output_path(c, fs::path(path).stem().string() + ".csv");
    export_csv(r, csv);
    report(std::cout, r);
    std::cout << "wrote " << csv << "\n";
    return exit_code(r);
}

int cmd_ground_state(const std::string& path, const Overrides& o) {
    const ScenarioConfig c = configure(read_json(path), o);
    const PreparedScenario p = prepare(c);
    std::cout << "k,n,re,im\n";
    for (std::size_t k = 0; k < p.psi.size(); ++k)
        std::cout << k + 1 << ',' << fmt(std::norm(p.psi[k])) << ',' << fmt(p.psi[k].real()) << ','
                  << fmt(p.psi[k].imag()) << "\n";
    if (c.initial.kind == InitialStateRecipe::Kind::ground_state) {
        LatticeParameters prep = p.params;
        prep.E = c.initial.energies;
        const Stationarity s = stationarity_residual(p.psi.amplitudes, prep);
        std::cerr << "chemical potential: " << fmt(s.chemical_potential) << "\nresidual: " << fmt(s.residual) << "\n";
    }
    return kExitOk;
}

int cmd_compare(const std::string& path, const Overrides& o) {
    ScenarioConfig c = configure(read_json(path), o);
    c.stride = 1;
    const RunRecord r = run(c);
    const EmbeddedDeviation d = compare_embedded(r, c);
    report(std::cout, r);
    std::cout << "max |n_m - n_1|: " << fmt(d.n1) << "\nmax |n_m+1 - n_2|: " << fmt(d.n2)
              << "\nmax |jt - jt_12|: " << fmt(d.jt) << "\nmax |C - C_12|: " << fmt(d.C) << "\n";
    return exit_code(r);
}

int cmd_spectrum(const std::string& path, const Overrides& o, const std::vector<double>& times) {
    ScenarioConfig c = configure(read_json(path), o);
    if (!times.empty()) c.snapshot_times = times;
    const RunRecord r = run(c);
    const std::string csv = output_path(c, fs::path(path).stem().string() + "_momentum.csv");
    export_momentum_csv(r.snapshots, csv);
    report(std::cout, r);
    if (r.snapshots.size() < c.snapshot_times.size())
        std::cout << "note: " << c.snapshot_times.size() - r.snapshots.size()
                  << " snapshot time(s) not reached before termination\n";
    std::cout << "wrote " << csv << "\n";
    return exit_code(r);
}

int cmd_sweep(const std::string& path, const Overrides& o, const std::string& pointer,
              const std::vector<double>& values, unsigned jobs) {
    const json base = read_json(path);
    const json::json_pointer ptr(pointer);
    if (!base.contains(ptr)) throw ConfigError("sweep: " + pointer + " does not exist in " + path);

    std::vector<ScenarioConfig> configs;
    for (double v : values) {
        json j = base;
        j[ptr] = v;
        configs.push_back(configure(j, o));
    }

    const std::string stem = fs::path(path).stem().string();
    std::vector<RunRecord> records(configs.size());
    std::vector<std::string> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < configs.size();) {
            try {
                records[i] = run(configs[i]);
                export_csv(records[i], output_path(configs[i], stem + "_" + std::to_string(i) + ".csv"));
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(jobs, configs.size()); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    int code = kExitOk;
    std::cout << "index,value,termination,end_time,file\n";
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "run " << i << ": " << errors[i] << "\n";
            code = std::max(code, kExitConfig);
            continue;
        }
        std::cout << i << ',' << fmt(values[i]) << ',' << to_string(records[i].termination) << ','
                  << fmt(records[i].end_time) << ',' << stem << "_" << i << ".csv\n";
        if (records[i].termination == Termination::blow_up) code = kExitBlowUp;
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedded PT-symmetric wells in Hermitian multi-well lattices"};
    app.require_subcommand(1);

    Overrides o;
    std::string config;
    std::vector<double> times;
    std::string pointer;
    std::vector<double> values;
    unsigned jobs = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config, "scenario JSON file")->required()->check(CLI::ExistingFile);
        sub->add_option("--dt", o.dt, "override integrator.dt");
        sub->add_option("--t-end", o.t_end, "override integrator.t_end");
        sub->add_option("--out", o.out, "override output.directory");
    };
    CLI::App* run_cmd = app.add_subcommand("run", "integrate a scenario and write its CSV");
    add_common(run_cmd);
    CLI::App* gs_cmd = app.add_subcommand("ground-state", "print the prepared initial state");
    add_common(gs_cmd);
    CLI::App* cmp_cmd = app.add_subcommand("compare", "deviation of the embedded wells from the two-mode model");
    add_common(cmp_cmd);
    CLI::App* spec_cmd = app.add_subcommand("spectrum", "momentum-space snapshots");
    add_common(spec_cmd);
    spec_cmd->add_option("--times", times, "snapshot times")->delimiter(',');
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run one scenario per parameter value");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--param", pointer, "JSON pointer into the config, e.g. /gamma/target")->required();
    sweep_cmd->add_option("--values", values, "values to substitute")->delimiter(',')->required();
    sweep_cmd->add_option("--jobs", jobs, "parallel workers (default: hardware threads)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run_cmd) return cmd_run(config, o);
        if (*gs_cmd) return cmd_ground_state(config, o);
        if (*cmp_cmd) return cmd_compare(config, o);
        if (*spec_cmd) return cmd_spectrum(config, o, times);
        if (*sweep_cmd) return cmd_sweep(config, o, pointer, values, jobs);
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InfeasibleInitialization& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
