#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "ptlattice/errors.hpp"
#include "ptlattice/scenario.hpp"

using namespace ptlattice;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = PTLATTICE_SCENARIO_DIR;

json four_well() {
    return json::parse(R"({
      "version": 1, "wells": 4, "m": 2, "tunneling": 1.0, "interaction": 0.0,
      "gamma": {"shape": "ramp", "target": 0.5, "ramp_time": 20},
      "gauge": {"kind": "constant", "initial_tunneling": 1.0},
      "reservoir": {"kind": "level-out"},
      "initial_state": {"kind": "populations", "populations": [10, 0.5, 0.5, 10]},
      "integrator": {"dt": 1e-3, "t_end": 2},
      "output": {"stride": 10}
    })");
}

std::string config_error(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ptlattice_test_" + std::to_string(::getpid())) / name;
    fs::create_directories(dir);
    return dir;
}

bool same_samples(const Sample& a, const Sample& b) {
    return a.step == b.step && a.t == b.t && a.n == b.n && a.j == b.j && a.E == b.E && a.J_left == b.J_left &&
           a.J_right == b.J_right && a.gamma == b.gamma && a.d == b.d && a.det == b.det && a.psi_m == b.psi_m &&
           a.psi_m1 == b.psi_m1;
}

int cli(const std::string& args) {
    const int status = std::system((std::string(PTLATTICE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("parse a config: 1-based wells become 0-based") {
    const ScenarioConfig c = parse_config(four_well());
    CHECK(c.wells == 4);
    CHECK(c.m == 1);
    CHECK(c.tunneling == std::vector<double>(3, 1.0));
    CHECK(c.interaction == std::vector<double>(4, 0.0));
    CHECK(c.gamma.shape == GammaSchedule::Shape::adiabatic_ramp);
    CHECK(c.gamma.target == 0.5);
    CHECK(c.gamma.ramp_time == 20);
    CHECK(c.gauge.kind == DStrategy::Kind::constant);
    CHECK_FALSE(c.gauge.d0);
    CHECK(c.initial.populations == std::vector<double>{10, 0.5, 0.5, 10});
    CHECK(c.dt == 1e-3);
    CHECK(c.stride == 10);
    CHECK(c.population_rate == PopulationRate::measured);

    json j = four_well();
    j["wells"] = 8;
    j["m"] = 4;
    j["initial_state"] = {{"kind", "gaussian-packet"}, {"center", 4.5}, {"width", 0.2}};
    const ScenarioConfig p = parse_config(j);
    CHECK(p.initial.center == 3.5);
    CHECK(p.initial.momentum == 0.0);
}

TEST_CASE("every shipped scenario parses") {
    for (const auto& entry : fs::directory_iterator(kScenarios)) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_config(entry.path().string()));
    }
}

TEST_CASE("invalid configs name the offending key") {
    json j = four_well();
    j["colour"] = "blue";
    CHECK(config_error(j).find("colour") != std::string::npos);

    j = four_well();
    j["gamma"]["targte"] = 0.5;
    CHECK(config_error(j).find("targte") != std::string::npos);

    j = four_well();
    j["integrator"]["dtt"] = 0.5;
    CHECK(config_error(j).find("dtt") != std::string::npos);

    j = four_well();
    j["version"] = 2;
    CHECK(config_error(j).find("version") != std::string::npos);

    j = four_well();
    j.erase("version");
    CHECK(config_error(j).find("version") != std::string::npos);

    j = four_well();
    j["integrator"].erase("dt");
    CHECK(config_error(j).find("dt") != std::string::npos);

    j = four_well();
    j["integrator"]["dt"] = "small";
    CHECK(config_error(j).find("integrator.dt") != std::string::npos);

    j = four_well();
    j["integrator"]["dt"] = -1e-3;
    CHECK(config_error(j).find("integrator.dt") != std::string::npos);

    j = four_well();
    j["m"] = 3;
    CHECK(config_error(j).find("m") == 0);

    j = four_well();
    j["wells"] = 3;
    CHECK(config_error(j).find("wells") != std::string::npos);

    j = four_well();
    j["interaction"] = json::array({0.0, 1.0, 0.0, 0.0});
    CHECK(config_error(j).find("interaction") != std::string::npos);

    j = four_well();
    j["tunneling"] = json::array({1.0, 1.0});
    CHECK(config_error(j).find("tunneling") != std::string::npos);

    j = four_well();
    j["gauge"] = {{"kind", "constant"}, {"d0", 0.0}};
    CHECK(config_error(j).find("gauge.d0") != std::string::npos);

    j = four_well();
    j["gauge"] = {{"kind", "sideways"}};
    CHECK(config_error(j).find("gauge.kind") != std::string::npos);

    j = four_well();
    j["reservoir"] = {{"kind", "specific-currents"}, {"weights_left", {0.5}}, {"weights_right", json::array()}};
    CHECK(config_error(j).find("reservoir") != std::string::npos);

    j = four_well();
    j["gamma"] = {{"shape", "ramp"}, {"target", 0.5}, {"ramp_time", 0.0}};
    CHECK(config_error(j).find("gamma.ramp_time") != std::string::npos);

    j = four_well();
    j["initial_state"]["norm"] = 2.0;
    CHECK(config_error(j).find("norm") != std::string::npos);

    j = four_well();
    j["output"]["stride"] = 0;
    CHECK(config_error(j).find("output.stride") != std::string::npos);

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("prepare: matched constant gauge and condition-consistent state") {
    const ScenarioConfig c = parse_config(four_well());
    const PreparedScenario p = prepare(c);
    CHECK(p.strategy.kind == DStrategy::Kind::constant);
    // C_{m,m+2} of the real initial state is 2 sqrt(0.5 * 10)
    CHECK(p.strategy.d0 == doctest::Approx(1.0 / (2.0 * std::sqrt(5.0))).epsilon(1e-15));
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::imag(p.psi[k]) == 0.0);
    CHECK(total_norm(p.psi.amplitudes) == doctest::Approx(21.0).epsilon(1e-15));

    json j = four_well();
    j["gamma"] = {{"shape", "constant"}, {"value", 50.0}};
    CHECK_THROWS_AS(prepare(parse_config(j)), InfeasibleInitialization);
}

TEST_CASE("run: deterministic and independent of the sampling stride") {
    json j = four_well();
    j["output"]["stride"] = 1;
    const ScenarioConfig every = parse_config(j);
    j["output"]["stride"] = 7;
    const ScenarioConfig sparse = parse_config(j);
    const RunRecord a = run(every);
    const RunRecord b = run(every);
    const RunRecord s = run(sparse);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(same_samples(a.samples[i], b.samples[i]));
    CHECK(a.final_state.amplitudes == b.final_state.amplitudes);
    CHECK(a.final_state.amplitudes == s.final_state.amplitudes);
    for (const Sample& x : s.samples) {
        REQUIRE(x.step < a.samples.size());
        CHECK(same_samples(x, a.samples[x.step]));
    }
    // the last step is always sampled
    CHECK(s.samples.back().step == 2000);
    CHECK(a.termination == Termination::completed);
    CHECK(a.end_time == doctest::Approx(2.0).epsilon(1e-15));
    for (std::size_t i = 1; i < s.samples.size(); ++i) CHECK(s.samples[i].t > s.samples[i - 1].t);
}

TEST_CASE("CSV round trip is bit exact") {
    const ScenarioConfig c = parse_config(four_well());
    const RunRecord r = run(c);
    const std::string path = (scratch("csv") / "four.csv").string();
    export_csv(r, path);
    const CsvTable t = read_csv(path);
    CHECK(t.header == csv_header(4));
    REQUIRE(t.rows.size() == r.samples.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const Sample& s = r.samples[i];
        std::vector<double> expected{s.t};
        expected.insert(expected.end(), s.n.begin(), s.n.end());
        expected.insert(expected.end(), s.j.begin(), s.j.end());
        expected.push_back(s.J_left);
        expected.push_back(s.J_right);
        expected.insert(expected.end(), s.E.begin(), s.E.end());
        expected.push_back(s.gamma);
        expected.push_back(s.d);
        expected.push_back(s.det);
        CHECK(t.rows[i] == expected);
    }

    RunRecord empty;
    empty.wells = 5;
    const std::string empty_path = (scratch("csv") / "empty.csv").string();
    export_csv(empty, empty_path);
    const CsvTable e = read_csv(empty_path);
    CHECK(e.header == csv_header(5));
    CHECK(e.rows.empty());
    CHECK(csv_header(4) == std::vector<std::string>{"t", "n_1", "n_2", "n_3", "n_4", "j_1_2", "j_2_3", "j_3_4",
                                                    "J_left", "J_right", "E_1", "E_2", "E_3", "E_4", "Gamma", "d",
                                                    "det"});
    CHECK_THROWS(export_csv(empty, "/nonexistent/dir/out.csv"));
}

TEST_CASE("momentum CSV") {
    json j = four_well();
    j["output"]["snapshot_times"] = {0.0, 1.0, 7.0};
    const RunRecord r = run(parse_config(j));
    REQUIRE(r.snapshots.size() == 2);
    CHECK(r.snapshots[1].t == 1.0);
    const std::string path = (scratch("momentum") / "m.csv").string();
    export_momentum_csv(r.snapshots, path);
    const CsvTable t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"t", "q", "power"});
    CHECK(t.rows.size() == 8);
}

TEST_CASE("terminations") {
    // constant gauge on the four-well ramp: the control breaks down before the reservoir is empty
    json j = four_well();
    j["integrator"]["t_end"] = 60;
    RunRecord r = run(parse_config(j));
    CHECK(r.termination == Termination::control_breakdown);
    CHECK(r.end_time > 20.0);
    CHECK(r.end_time < 60.0);
    CHECK(r.samples.back().t <= r.end_time);

    // a larger reservoir runs until well 1 is exhausted
    j["initial_state"]["populations"] = {1.0, 0.5, 0.5, 1.0};
    j["gauge"] = {{"kind", "compensating"}};
    j["gamma"] = {{"shape", "constant"}, {"value", 0.3}};
    j["output"]["empty_fraction"] = 0.1;
    r = run(parse_config(j));
    CHECK(r.termination == Termination::reservoir_empty);
    REQUIRE(r.empty_well);
    CHECK((*r.empty_well == 0 || *r.empty_well == 3));

    // without the guards, a far too large step overflows
    j = four_well();
    j["gamma"] = {{"shape", "constant"}, {"value", 0.0}};
    j["integrator"] = {{"dt", 3.0}, {"t_end", 3000}, {"stiffness_limit", 0.0}, {"conditioning_floor", 0.0}};
    r = run(parse_config(j));
    CHECK(r.termination == Termination::blow_up);
}

TEST_CASE("compare_embedded rejects mismatched inputs") {
    const ScenarioConfig c = parse_config(four_well());
    const RunRecord r = run(c);
    ScenarioConfig other = c;
    other.gamma.target = 0.4;
    CHECK_THROWS_AS(compare_embedded(r, other), std::invalid_argument);
    other = c;
    other.dt = 2e-3;
    CHECK_THROWS_AS(compare_embedded(r, other), std::invalid_argument);
    CHECK(compare_embedded(r, c).max() < 1e-9);
}

TEST_CASE("specific currents j12 = j23 / 2 drain both left wells equally") {
    json j = four_well();
    j["wells"] = 6;
    j["m"] = 3;
    j["gauge"] = {{"kind", "compensating"}};
    j["reservoir"] = {{"kind", "specific-currents"}, {"weights_left", {0.5}}, {"weights_right", {0.5}}};
    j["initial_state"]["populations"] = {4, 4, 0.5, 0.5, 4, 4};
    j["integrator"] = {{"dt", 1e-3}, {"t_end", 25}};
    const RunRecord r = run(parse_config(j));
    double gap = 0.0, tracking = 0.0;
    for (const Sample& s : r.samples) {
        gap = std::max(gap, std::abs(s.n[0] - s.n[1]));
        tracking = std::max({tracking, std::abs(s.j[0] - 0.5 * 2 * s.gamma * s.n[2]),
                             std::abs(s.j[4] - 0.5 * 2 * s.gamma * s.n[3])});
    }
    CHECK(r.samples.back().n[0] < 3.0);
    CHECK(gap < 1e-8);
    CHECK(tracking < 1e-8);
}

TEST_CASE("leveled-out six wells: half the drain per well, same breakdown time") {
    const RunRecord single = run(load_config(kScenarios + "/four_well_large_reservoir.json"));
    const RunRecord leveled = run(load_config(kScenarios + "/six_well_level_out.json"));
    CHECK(single.termination == Termination::reservoir_empty);
    CHECK(leveled.termination == Termination::reservoir_empty);
    CHECK(std::abs(leveled.end_time / single.end_time - 1.0) < 0.02);
    // at t = 20 the total drained from the left is the same, spread over two wells
    const Sample& a = single.samples[2000];
    const Sample& b = leveled.samples[2000];
    REQUIRE(a.t == 20.0);
    const double drained_single = single.samples[0].n[0] - a.n[0];
    const double drained_pair = leveled.samples[0].n[0] + leveled.samples[0].n[1] - b.n[0] - b.n[1];
    CHECK(drained_pair == doctest::Approx(drained_single).epsilon(1e-6));
    CHECK(leveled.samples[0].n[0] - b.n[0] < 0.6 * drained_single);
    CHECK(leveled.samples[0].n[1] - b.n[1] < 0.6 * drained_single);
    // at t = 0 (Gamma = 0) the solved energies keep the prepared ground state stationary,
    // so they reproduce the preparation energy on every reservoir well
    const Sample& start = leveled.samples[0];
    const double E_L = -4.590651554474657;
    for (std::size_t k : {0u, 1u, 4u, 5u}) CHECK(start.E[k] == doctest::Approx(E_L).epsilon(1e-12));
    CHECK(start.E[2] == 0.0);
    CHECK(start.E[3] == 0.0);
    CHECK(start.det == doctest::Approx(-22.114559108447576).epsilon(1e-10));
}

TEST_CASE("command line") {
    const std::string dir = scratch("cli").string();
    std::ofstream(dir + "/bad.json") << R"({"version": 1, "wells": 4, "m": 2, "unexpected": true})";
    CHECK(cli("run " + dir + "/bad.json --out " + dir) == 2);
    std::ofstream(dir + "/broken.json") << "{ not json";
    CHECK(cli("run " + dir + "/broken.json --out " + dir) == 2);
    CHECK(cli("run") == 2);

    std::ofstream(dir + "/four.json") << four_well().dump();
    CHECK(cli("run " + dir + "/four.json --out " + dir) == 0);
    CHECK(fs::exists(dir + "/four.csv"));
    CHECK(read_csv(dir + "/four.csv").rows.size() == 201);
    CHECK(cli("run " + dir + "/four.json --t-end 1 --dt 0.005 --out " + dir) == 0);
    CHECK(read_csv(dir + "/four.csv").rows.size() == 21);
    CHECK(cli("compare " + dir + "/four.json --out " + dir) == 0);
    CHECK(cli("ground-state " + dir + "/four.json") == 0);
    CHECK(cli("spectrum " + dir + "/four.json --times 0,1 --out " + dir) == 0);
    CHECK(read_csv(dir + "/four_momentum.csv").rows.size() == 8);
    CHECK(cli("sweep " + dir + "/four.json --param /gamma/target --values 0.2,0.3,0.4 --jobs 2 --out " + dir) == 0);
    for (int i = 0; i < 3; ++i) CHECK(fs::exists(dir + "/four_" + std::to_string(i) + ".csv"));
    CHECK(cli("sweep " + dir + "/four.json --param /gamma/nothing --values 1 --out " + dir) == 2);

    json blow = four_well();
    blow["gamma"] = {{"shape", "constant"}, {"value", 0.0}};
    blow["integrator"] = {{"dt", 3.0}, {"t_end", 3000}, {"stiffness_limit", 0.0}, {"conditioning_floor", 0.0}};
    std::ofstream(dir + "/blow.json") << blow.dump();
    CHECK(cli("run " + dir + "/blow.json --out " + dir) == 3);
}

TEST_CASE("substituted population rates: r2 grows like exp(2 Gamma t), measured rates hold it") {
    ScenarioConfig c = load_config(kScenarios + "/four_well_ramp.json");
    const RunRecord measured = run(c);
    c.population_rate = PopulationRate::substituted;
    const RunRecord substituted = run(c);
    CHECK(measured.summary.max_r2 < 1e-12);
    CHECK(substituted.summary.max_r2 > 1e-8);
    // after the ramp Gamma = 0.5, so log|r2| rises with slope 1
    const auto at = [&](double t) {
        for (const Sample& s : substituted.samples)
            if (std::abs(s.t - t) < 1e-9) return std::log(std::abs(s.residuals.r2));
        FAIL("no sample at t = " << t);
        return 0.0;
    };
    CHECK((at(25.0) - at(21.0)) / 4.0 == doctest::Approx(1.0).epsilon(0.01));
}
