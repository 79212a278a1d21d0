#pragma once

// Scenario configuration, the simulation loop and its outputs.
//
// Config files are JSON with "version": 1. Well numbers in config files are 1-based
// (as in the CSV headers); the in-memory ScenarioConfig is 0-based like the rest of
// the library.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlattice/control.hpp"
#include "ptlattice/lattice.hpp"
#include "ptlattice/reservoir.hpp"
#include "ptlattice/schedule.hpp"

namespace ptlattice {

struct InitialStateRecipe {
    enum class Kind { ground_state, populations, gaussian_packet };

    Kind kind = Kind::populations;
    // ground_state: Hermitian onsite energies to prepare in, and the total norm
    std::vector<double> energies;
    double norm = 1.0;
    // populations: n_k and optional phases
    std::vector<double> populations;
    std::vector<double> phases;
    // gaussian_packet (0-based centre)
    double center = 0.0;
    double momentum = 0.0;
    double width = 0.0;
};

struct GaugeConfig {
    DStrategy::Kind kind = DStrategy::Kind::constant;
    // constant: either d0 directly, or matched so that J_{m-1,m}(0) = initial_tunneling
    std::optional<double> d0;
    double initial_tunneling = 1.0;
    // compensating
    double tunneling_left = 1.0;
    double tunneling_right = 1.0;
};

struct ScenarioConfig {
    std::size_t wells = 4;
    std::size_t m = 1;                 // 0-based first embedded well
    std::vector<double> tunneling;     // size wells-1; controlled entries are overwritten
    std::vector<double> interaction;   // size wells
    GammaSchedule gamma;
    GaugeConfig gauge;
    ReservoirStrategy reservoir;
    InitialStateRecipe initial;
    double dt = 1e-3;
    double t_end = 1.0;
    PopulationRate population_rate = PopulationRate::measured;
    // Breakdown when |det M| / scale(M) of the energy system, or |C_{k,k+1}| / (2 sqrt(n_k n_{k+1}))
    // on a current-driven reservoir link, falls below this.
    double conditioning_floor = 0.1;
    // Breakdown when (max|E_k + g_k n_k| + 2 max|J|) dt exceeds this; <= 0 disables.
    double stiffness_limit = 0.05;
    // A reservoir well counts as empty below this fraction of its initial population
    // (wells m-1, m+2, and all reservoir wells under current-driven strategies).
    double empty_fraction = 1e-3;
    std::size_t stride = 10;
    std::vector<double> snapshot_times;
    std::string output_directory = ".";
};

// Throws ConfigError with the offending key in the message.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
void validate(const ScenarioConfig& config);

struct PreparedScenario {
    LatticeParameters params;   // base Hermitian parameters (energies zero unless prepared)
    LatticeWavefunction psi;    // phase-initialized state at t = 0
    DStrategy strategy;
    ReservoirStrategy reservoir;
    double chemical_potential = 0.0;  // ground-state recipes only
};

// Builds the initial state and resolves gauge and reservoir weights.
PreparedScenario prepare(const ScenarioConfig& config);

enum class Termination { completed, reservoir_empty, control_breakdown, blow_up };
const char* to_string(Termination t);

struct Sample {
    std::size_t step = 0;
    double t = 0.0;
    std::vector<double> n;
    std::vector<double> j;  // j_{k,k+1} with the tunnelings in force
    std::vector<double> E;
    double J_left = 0.0;
    double J_right = 0.0;
    double gamma = 0.0;
    double d = 0.0;
    double det = 0.0;
    double det_scale = 0.0;
    double det_analytic = 0.0;
    ConditionResiduals residuals{};
    double norm = 0.0;
    cplx psi_m;
    cplx psi_m1;
};

struct Snapshot {
    double t;
    std::vector<cplx> psi;
};

struct RunSummary {
    double max_r1 = 0.0;
    double max_r2 = 0.0;
    double max_r3 = 0.0;
    double max_r4 = 0.0;
    double max_det_relative_error = 0.0;
    double max_norm_drift = 0.0;
    std::size_t branch_flips = 0;
    double max_flip_radicand = 0.0;  // largest sqrt(radicand) seen at a branch flip
    std::size_t steps = 0;
};

struct RunRecord {
    std::size_t wells = 0;
    std::size_t m = 0;
    double dt = 0.0;
    GammaSchedule gamma;
    std::vector<Sample> samples;
    std::vector<Snapshot> snapshots;
    LatticeWavefunction final_state;
    Termination termination = Termination::completed;
    std::optional<std::size_t> empty_well;  // 0-based, reservoir-empty only
    double end_time = 0.0;
    std::string message;
    RunSummary summary;
};

struct RunHooks {
    // Called after the control chain has filled the parameters, at every RK4 stage.
    std::function<void(double t, LatticeParameters&)> perturb;
};

// Breakdown and blow-up are recorded in the returned record, not raised.
RunRecord run(const ScenarioConfig& config, const RunHooks& hooks = {});

struct EmbeddedDeviation {
    double n1 = 0.0;
    double n2 = 0.0;
    double jt = 0.0;
    double C = 0.0;

    double max() const;
};

// Integrates the two-mode model from the recorded initial embedded amplitudes with the
// record's step and schedule and compares at every sample.
// Throws std::invalid_argument when record and config disagree on dt or schedule.
EmbeddedDeviation compare_embedded(const RunRecord& record, const ScenarioConfig& config);

// Columns: t, n_1..n_N, j_1_2..j_{N-1}_N, J_left, J_right, E_1..E_N, Gamma, d, det
std::vector<std::string> csv_header(std::size_t wells);
void export_csv(const RunRecord& record, const std::string& path);
// Columns: t, q, power
void export_momentum_csv(const std::vector<Snapshot>& snapshots, const std::string& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

}  // namespace ptlattice
