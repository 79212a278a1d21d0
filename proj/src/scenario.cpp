#include "ptlattice/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ptlattice/errors.hpp"
#include "ptlattice/ground_state.hpp"
#include "ptlattice/semiclassical.hpp"
#include "ptlattice/two_mode.hpp"

namespace ptlattice {

using nlohmann::json;

namespace {

// ---- config parsing --------------------------------------------------------

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

const json& require(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
    return obj.at(key);
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
}

std::size_t count(const json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

// A scalar broadcast to `size` entries, or an explicit array of that size.
std::vector<double> scalar_or_array(const json& v, std::size_t size, const std::string& where) {
    if (v.is_number()) return std::vector<double>(size, v.get<double>());
    std::vector<double> out = numbers(v, where);
    if (out.size() != size)
        throw ConfigError(where + ": expected " + std::to_string(size) + " entries, got " + std::to_string(out.size()));
    return out;
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

GammaSchedule parse_gamma(const json& j) {
    reject_unknown(j, "gamma", {"shape", "value", "target", "ramp_time"});
    const std::string shape = text(require(j, "gamma", "shape"), "gamma.shape");
    if (shape == "constant") {
        if (j.contains("target") || j.contains("ramp_time"))
            throw ConfigError("gamma: constant shape takes only \"value\"");
        return GammaSchedule::constant(number(require(j, "gamma", "value"), "gamma.value"));
    }
    if (shape == "ramp") {
        if (j.contains("value")) throw ConfigError("gamma: ramp shape takes \"target\" and \"ramp_time\"");
        return GammaSchedule::ramp(number(require(j, "gamma", "target"), "gamma.target"),
                                   number(require(j, "gamma", "ramp_time"), "gamma.ramp_time"));
    }
    throw ConfigError("gamma.shape: unknown shape \"" + shape + "\" (constant, ramp)");
}

GaugeConfig parse_gauge(const json& j) {
    reject_unknown(j, "gauge", {"kind", "d0", "initial_tunneling", "tunneling_left", "tunneling_right"});
    const std::string kind = text(require(j, "gauge", "kind"), "gauge.kind");
    GaugeConfig g;
    if (kind == "constant") {
        g.kind = DStrategy::Kind::constant;
        if (j.contains("tunneling_left") || j.contains("tunneling_right"))
            throw ConfigError("gauge: constant kind takes \"d0\" or \"initial_tunneling\"");
        if (j.contains("d0") && j.contains("initial_tunneling"))
            throw ConfigError("gauge: give either \"d0\" or \"initial_tunneling\", not both");
        if (j.contains("d0")) g.d0 = number(j.at("d0"), "gauge.d0");
        if (j.contains("initial_tunneling")) g.initial_tunneling = number(j.at("initial_tunneling"), "gauge.initial_tunneling");
    } else if (kind == "compensating") {
        g.kind = DStrategy::Kind::compensating;
        if (j.contains("d0") || j.contains("initial_tunneling"))
            throw ConfigError("gauge: compensating kind takes \"tunneling_left\" and \"tunneling_right\"");
        if (j.contains("tunneling_left")) g.tunneling_left = number(j.at("tunneling_left"), "gauge.tunneling_left");
        if (j.contains("tunneling_right")) g.tunneling_right = number(j.at("tunneling_right"), "gauge.tunneling_right");
    } else {
        throw ConfigError("gauge.kind: unknown kind \"" + kind + "\" (constant, compensating)");
    }
    return g;
}

ReservoirStrategy parse_reservoir(const json& j) {
    reject_unknown(j, "reservoir", {"kind", "weights_left", "weights_right"});
    const std::string kind = text(require(j, "reservoir", "kind"), "reservoir.kind");
    ReservoirStrategy r;
    const bool has_weights = j.contains("weights_left") || j.contains("weights_right");
    if (kind == "level-out") {
        r.kind = ReservoirStrategy::Kind::level_out;
    } else if (kind == "specific-currents") {
        r.kind = ReservoirStrategy::Kind::specific_currents;
        r.weights.left = numbers(require(j, "reservoir", "weights_left"), "reservoir.weights_left");
        r.weights.right = numbers(require(j, "reservoir", "weights_right"), "reservoir.weights_right");
        return r;
    } else if (kind == "proportional-currents") {
        r.kind = ReservoirStrategy::Kind::proportional_currents;
    } else if (kind == "stark-lattice") {
        r.kind = ReservoirStrategy::Kind::stark_lattice;
    } else {
        throw ConfigError("reservoir.kind: unknown kind \"" + kind +
                          "\" (level-out, specific-currents, proportional-currents, stark-lattice)");
    }
    if (has_weights) throw ConfigError("reservoir: weights are only accepted for specific-currents");
    return r;
}

InitialStateRecipe parse_initial(const json& j, std::size_t wells) {
    reject_unknown(j, "initial_state",
                   {"kind", "energies", "norm", "populations", "phases", "center", "momentum", "width"});
    const std::string kind = text(require(j, "initial_state", "kind"), "initial_state.kind");
    InitialStateRecipe r;
    auto forbid = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys)
            if (j.contains(k)) throw ConfigError("initial_state: \"" + std::string(k) + "\" does not apply to kind " + kind);
    };
    if (kind == "ground-state") {
        forbid({"populations", "phases", "center", "momentum", "width"});
        r.kind = InitialStateRecipe::Kind::ground_state;
        r.energies = j.contains("energies") ? scalar_or_array(j.at("energies"), wells, "initial_state.energies")
                                            : std::vector<double>(wells, 0.0);
        if (j.contains("norm")) r.norm = number(j.at("norm"), "initial_state.norm");
    } else if (kind == "populations") {
        forbid({"energies", "norm", "center", "momentum", "width"});
        r.kind = InitialStateRecipe::Kind::populations;
        r.populations = scalar_or_array(require(j, "initial_state", "populations"), wells, "initial_state.populations");
        r.phases = j.contains("phases") ? scalar_or_array(j.at("phases"), wells, "initial_state.phases")
                                        : std::vector<double>(wells, 0.0);
    } else if (kind == "gaussian-packet") {
        forbid({"energies", "norm", "populations", "phases"});
        r.kind = InitialStateRecipe::Kind::gaussian_packet;
        r.center = number(require(j, "initial_state", "center"), "initial_state.center") - 1.0;
        if (j.contains("momentum")) r.momentum = number(j.at("momentum"), "initial_state.momentum");
        r.width = number(require(j, "initial_state", "width"), "initial_state.width");
    } else {
        throw ConfigError("initial_state.kind: unknown kind \"" + kind +
                          "\" (ground-state, populations, gaussian-packet)");
    }
    return r;
}

// ---- run helpers -----------------------------------------------------------

class ReservoirEmpty : public std::runtime_error {
public:
    ReservoirEmpty(std::size_t well, double population)
        : std::runtime_error("well " + std::to_string(well + 1) + " ran empty (n = " + std::to_string(population) + ")"),
          well_(well) {}
    std::size_t well() const { return well_; }

private:
    std::size_t well_;
};

// An intermediate RK4 stage left the finite range.
class StageBlowUp : public std::runtime_error {
public:
    StageBlowUp() : std::runtime_error("state became non-finite") {}
};

struct ChainResult {
    ControlState control;
    GammaValue gamma;
};

// Full control chain at one state: controller, then reservoir energies, then the guard.
ChainResult control_chain(const ScenarioConfig& cfg, const EmbeddingController& controller,
                          const ReservoirStrategy& reservoir, const LatticeParameters& base, double t,
                          std::span<const cplx> psi, const RunHooks& hooks, LatticeParameters& out) {
    out = base;
    const std::size_t m = cfg.m;
    ChainResult r{controller.apply(t, psi, out), gamma(t, cfg.gamma)};
    if (!(std::abs(r.control.det_numeric) >= cfg.conditioning_floor * r.control.det_scale))
        throw ControlBreakdown("energy system ill-conditioned: |det| / scale = " +
                               std::to_string(std::abs(r.control.det_numeric) / r.control.det_scale));
    switch (reservoir.kind) {
        case ReservoirStrategy::Kind::level_out: {
            std::vector<double> E = level_out(r.control.E_left, r.control.E_right, cfg.wells, m);
            E[m - 1] = r.control.E_left;
            E[m + 2] = r.control.E_right;
            out.E = std::move(E);
            break;
        }
        case ReservoirStrategy::Kind::stark_lattice:
            out.E = stark_extension(r.control.E_left, r.control.E_right, m, cfg.wells).E;
            break;
        case ReservoirStrategy::Kind::specific_currents:
        case ReservoirStrategy::Kind::proportional_currents: {
            const std::vector<double> rates = target_current_rates(reservoir.weights, psi, out, r.gamma, m);
            for (std::size_t k = 0; k + 1 < psi.size(); ++k) {
                if (k + 1 >= m && k <= m + 1) continue;
                const double reach = 2.0 * std::abs(psi[k]) * std::abs(psi[k + 1]);
                const double C = correlation(psi, static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(k + 1));
                if (!(std::abs(C) >= cfg.conditioning_floor * reach))
                    throw ControlBreakdown("reservoir link " + std::to_string(k + 1) + "-" + std::to_string(k + 2) +
                                           " saturated: |C| / 2 sqrt(n n) = " + std::to_string(std::abs(C) / reach));
            }
            specific_current_energies(psi, out, rates, m, out.E);
            break;
        }
    }
    if (hooks.perturb) hooks.perturb(t, out);

    if (cfg.stiffness_limit > 0.0) {
        double diag = 0.0;
        double hop = 0.0;
        for (std::size_t k = 0; k < psi.size(); ++k) diag = std::max(diag, std::abs(out.E[k] + out.g[k] * std::norm(psi[k])));
        for (double J : out.J) hop = std::max(hop, std::abs(J));
        const double stiffness = (diag + 2.0 * hop) * cfg.dt;
        if (!(stiffness <= cfg.stiffness_limit))
            throw ControlBreakdown("control elements diverge: spectral radius times dt = " + std::to_string(stiffness));
    }
    return r;
}

// The sign in front of the square root follows the trajectory: where the radicand touches
// zero the numeric determinant continues on the other branch.
void follow_branch(EmbeddingController& controller, std::span<const cplx> psi, ChainResult& chain, RunSummary& s) {
    if (!controller.branch()) return;
    const Branch current = *controller.branch();
    const Branch other = current == Branch::plus ? Branch::minus : Branch::plus;
    const auto& cs = chain.control;
    const AnalyticDeterminant a = analytic_determinant(psi, cs.d, chain.gamma.value, controller.strategy().kind, controller.m(), current);
    const AnalyticDeterminant b = analytic_determinant(psi, cs.d, chain.gamma.value, controller.strategy().kind, controller.m(), other);
    if (!b.valid) return;
    if (a.valid && std::abs(a.det - cs.det_numeric) <= std::abs(b.det - cs.det_numeric)) return;
    controller.set_branch(other);
    chain.control.sign = other;
    chain.control.det_analytic = b.det;
    ++s.branch_flips;
    s.max_flip_radicand = std::max(s.max_flip_radicand, std::sqrt(std::max(b.radicand, 0.0)));
}

void check_reservoir(const ScenarioConfig& cfg, std::span<const cplx> psi, std::span<const double> n0) {
    const std::size_t m = cfg.m;
    auto check = [&](std::size_t k) {
        const double n = std::norm(psi[k]);
        if (n < cfg.empty_fraction * n0[k] || n < kEmptyWell) throw ReservoirEmpty(k, n);
    };
    check(m - 1);
    check(m + 2);
    if (cfg.reservoir.drives_currents())
        for (std::size_t k = 0; k < psi.size(); ++k)
            if (k + 1 < m || k > m + 2) check(k);
}

Sample make_sample(std::size_t step, double t, std::span<const cplx> psi, const LatticeParameters& params,
                   const ChainResult& chain, std::size_t m) {
    Sample s;
    s.step = step;
    s.t = t;
    const std::size_t N = psi.size();
    s.n.resize(N);
    for (std::size_t k = 0; k < N; ++k) s.n[k] = std::norm(psi[k]);
    s.j.resize(N - 1);
    for (std::size_t k = 0; k + 1 < N; ++k) s.j[k] = current(psi, params, k);
    s.E = params.E;
    s.J_left = params.J[m - 1];
    s.J_right = params.J[m + 1];
    s.gamma = chain.gamma.value;
    s.d = chain.control.d;
    s.det = chain.control.det_numeric;
    s.det_scale = chain.control.det_scale;
    s.det_analytic = chain.control.det_analytic;
    s.norm = total_norm(psi);
    s.psi_m = psi[m];
    s.psi_m1 = psi[m + 1];
    return s;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_for_writing(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing: " + std::strerror(errno));
    return out;
}

void finish_writing(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace

ScenarioConfig parse_config(const json& j) {
    reject_unknown(j, "config", {"version", "wells", "m", "tunneling", "interaction", "gamma", "gauge",
                                 "reservoir", "initial_state", "integrator", "output"});
    const json& version = require(j, "config", "version");
    if (!version.is_number_integer() || version.get<int>() != 1)
        throw ConfigError("config: unsupported version " + version.dump() + " (expected 1)");

    ScenarioConfig c;
    c.wells = count(require(j, "config", "wells"), "wells");
    if (c.wells < 4) throw ConfigError("wells: need at least 4, got " + std::to_string(c.wells));
    const std::size_t m1 = count(require(j, "config", "m"), "m");
    if (m1 < 2 || m1 + 2 > c.wells)
        throw ConfigError("m: embedded wells m, m+1 need a neighbour on each side (m = " + std::to_string(m1) +
                          ", wells = " + std::to_string(c.wells) + ")");
    c.m = m1 - 1;
    c.tunneling = j.contains("tunneling") ? scalar_or_array(j.at("tunneling"), c.wells - 1, "tunneling")
                                          : std::vector<double>(c.wells - 1, 1.0);
    c.interaction = j.contains("interaction") ? scalar_or_array(j.at("interaction"), c.wells, "interaction")
                                              : std::vector<double>(c.wells, 0.0);
    c.gamma = parse_gamma(require(j, "config", "gamma"));
    c.gauge = parse_gauge(require(j, "config", "gauge"));
    c.reservoir = parse_reservoir(require(j, "config", "reservoir"));
    c.initial = parse_initial(require(j, "config", "initial_state"), c.wells);

    const json& integ = require(j, "config", "integrator");
    reject_unknown(integ, "integrator", {"dt", "t_end", "population_rate", "stiffness_limit", "conditioning_floor"});
    c.dt = number(require(integ, "integrator", "dt"), "integrator.dt");
    c.t_end = number(require(integ, "integrator", "t_end"), "integrator.t_end");
    if (integ.contains("population_rate")) {
        const std::string rate = text(integ.at("population_rate"), "integrator.population_rate");
        if (rate == "measured") c.population_rate = PopulationRate::measured;
        else if (rate == "substituted") c.population_rate = PopulationRate::substituted;
        else throw ConfigError("integrator.population_rate: unknown value \"" + rate + "\" (measured, substituted)");
    }
    if (integ.contains("conditioning_floor"))
        c.conditioning_floor = number(integ.at("conditioning_floor"), "integrator.conditioning_floor");
    if (integ.contains("stiffness_limit")) c.stiffness_limit = number(integ.at("stiffness_limit"), "integrator.stiffness_limit");

    if (j.contains("output")) {
        const json& out = j.at("output");
        reject_unknown(out, "output", {"directory", "stride", "snapshot_times", "empty_fraction"});
        if (out.contains("directory")) c.output_directory = text(out.at("directory"), "output.directory");
        if (out.contains("stride")) c.stride = count(out.at("stride"), "output.stride");
        if (out.contains("snapshot_times")) c.snapshot_times = numbers(out.at("snapshot_times"), "output.snapshot_times");
        if (out.contains("empty_fraction")) c.empty_fraction = number(out.at("empty_fraction"), "output.empty_fraction");
    }
    validate(c);
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

void validate(const ScenarioConfig& c) {
    if (c.wells < 4) throw ConfigError("wells: need at least 4");
    if (c.m < 1 || c.m + 3 > c.wells) throw ConfigError("m: embedded wells need a neighbour on each side");
    if (c.tunneling.size() != c.wells - 1) throw ConfigError("tunneling: wrong number of entries");
    if (c.interaction.size() != c.wells) throw ConfigError("interaction: wrong number of entries");
    for (std::size_t k = 0; k + 1 < c.wells; ++k)
        if (k + 1 != c.m && k != c.m + 1 && !(c.tunneling[k] != 0.0 && std::isfinite(c.tunneling[k])))
            throw ConfigError("tunneling: J_" + std::to_string(k + 1) + "," + std::to_string(k + 2) +
                              " must be finite and non-zero");
    if (c.interaction[c.m] != c.interaction[c.m + 1])
        throw ConfigError("interaction: embedded wells need equal g (g_m = g_m+1)");
    if (!(c.dt > 0.0)) throw ConfigError("integrator.dt: must be positive");
    if (!(c.t_end > 0.0)) throw ConfigError("integrator.t_end: must be positive");
    if (!(c.conditioning_floor >= 0.0 && c.conditioning_floor < 1.0))
        throw ConfigError("integrator.conditioning_floor: must lie in [0, 1)");
    if (c.stride < 1) throw ConfigError("output.stride: must be at least 1");
    if (!(c.empty_fraction >= 0.0 && c.empty_fraction < 1.0))
        throw ConfigError("output.empty_fraction: must lie in [0, 1)");
    if (c.gamma.shape == GammaSchedule::Shape::adiabatic_ramp && !(c.gamma.ramp_time > 0.0))
        throw ConfigError("gamma.ramp_time: must be positive");
    if (!(c.gamma.target >= 0.0)) throw ConfigError("gamma: Gamma must be non-negative");
    if (c.gauge.kind == DStrategy::Kind::constant) {
        if (c.gauge.d0 && !(*c.gauge.d0 != 0.0 && std::isfinite(*c.gauge.d0)))
            throw ConfigError("gauge.d0: must be finite and non-zero");
        if (!c.gauge.d0 && !(c.gauge.initial_tunneling != 0.0))
            throw ConfigError("gauge.initial_tunneling: must be non-zero");
    }
    if (c.reservoir.kind == ReservoirStrategy::Kind::specific_currents) {
        try {
            validate_weights(c.reservoir.weights, c.wells, c.m);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("reservoir: ") + e.what());
        }
    }
    const InitialStateRecipe& r = c.initial;
    switch (r.kind) {
        case InitialStateRecipe::Kind::ground_state:
            if (r.energies.size() != c.wells) throw ConfigError("initial_state.energies: wrong number of entries");
            if (!(r.norm > 0.0)) throw ConfigError("initial_state.norm: must be positive");
            break;
        case InitialStateRecipe::Kind::populations:
            if (r.populations.size() != c.wells || r.phases.size() != c.wells)
                throw ConfigError("initial_state: populations and phases need one entry per well");
            for (double n : r.populations)
                if (!(n >= 0.0)) throw ConfigError("initial_state.populations: must be non-negative");
            break;
        case InitialStateRecipe::Kind::gaussian_packet:
            if (!(r.width > 0.0)) throw ConfigError("initial_state.width: must be positive");
            break;
    }
}

PreparedScenario prepare(const ScenarioConfig& cfg) {
    validate(cfg);
    PreparedScenario p;
    p.params.E.assign(cfg.wells, 0.0);
    p.params.J = cfg.tunneling;
    p.params.g = cfg.interaction;
    const std::size_t m = cfg.m;

    LatticeWavefunction seed;
    switch (cfg.initial.kind) {
        case InitialStateRecipe::Kind::ground_state: {
            GroundStateRequest req;
            req.params = p.params;
            req.params.E = cfg.initial.energies;
            req.total_norm = cfg.initial.norm;
            const GroundStateResult gs = ground_state(req);
            seed = gs.psi;
            p.chemical_potential = gs.chemical_potential;
            break;
        }
        case InitialStateRecipe::Kind::populations:
            seed.amplitudes.resize(cfg.wells);
            for (std::size_t k = 0; k < cfg.wells; ++k)
                seed[k] = std::polar(std::sqrt(cfg.initial.populations[k]), cfg.initial.phases[k]);
            break;
        case InitialStateRecipe::Kind::gaussian_packet:
            seed = gaussian_packet(cfg.wells, cfg.initial.center, cfg.initial.momentum, cfg.initial.width);
            break;
    }
    seed.time = 0.0;

    if (cfg.gauge.kind == DStrategy::Kind::compensating) {
        p.strategy = DStrategy::compensating(cfg.gauge.tunneling_left, cfg.gauge.tunneling_right);
    } else if (cfg.gauge.d0) {
        p.strategy = DStrategy::constant(*cfg.gauge.d0);
    } else {
        const double C = correlation(seed.amplitudes, static_cast<std::ptrdiff_t>(m), static_cast<std::ptrdiff_t>(m + 2));
        if (C == 0.0) throw ConfigError("gauge: cannot match initial tunneling, C_{m,m+2} vanishes in the initial state");
        p.strategy = DStrategy::constant(cfg.gauge.initial_tunneling / C);
    }

    p.reservoir = cfg.reservoir;
    if (p.reservoir.kind == ReservoirStrategy::Kind::proportional_currents) {
        std::vector<double> n0(cfg.wells);
        for (std::size_t k = 0; k < cfg.wells; ++k) n0[k] = std::norm(seed[k]);
        try {
            p.reservoir.weights = proportional_weights(n0, m);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("reservoir: ") + e.what());
        }
    }
    const double gamma0 = gamma(0.0, cfg.gamma).value;
    p.psi = initialize_state(seed, gamma0, p.params, m, p.strategy,
                             p.reservoir.drives_currents() ? &p.reservoir.weights : nullptr);
    return p;
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::completed: return "completed";
        case Termination::reservoir_empty: return "reservoir-empty";
        case Termination::control_breakdown: return "control-breakdown";
        case Termination::blow_up: return "blow-up";
    }
    return "unknown";
}

RunRecord run(const ScenarioConfig& cfg, const RunHooks& hooks) {
    const PreparedScenario prep = prepare(cfg);
    const std::size_t m = cfg.m;
    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));

    RunRecord rec;
    rec.wells = cfg.wells;
    rec.m = m;
    rec.dt = cfg.dt;
    rec.gamma = cfg.gamma;

    EmbeddingController controller(m, prep.strategy, cfg.gamma, cfg.population_rate);
    LatticeWavefunction psi = prep.psi;

    std::vector<std::size_t> snapshot_steps;
    for (double t : cfg.snapshot_times)
        if (t >= 0.0) snapshot_steps.push_back(static_cast<std::size_t>(std::llround(t / cfg.dt)));
    std::sort(snapshot_steps.begin(), snapshot_steps.end());

    const double norm0 = total_norm(psi.amplitudes);
    std::vector<double> n_initial(cfg.wells);
    for (std::size_t k = 0; k < cfg.wells; ++k) n_initial[k] = std::norm(psi[k]);
    LatticeParameters params;
    const ParameterProvider provider = [&](const LatticeWavefunction& stage) {
        if (!is_finite(stage.amplitudes)) throw StageBlowUp();
        LatticeParameters out;
        control_chain(cfg, controller, prep.reservoir, prep.params, stage.time, stage.amplitudes, hooks, out);
        return out;
    };

    std::size_t step = 0;
    try {
        controller.select_branch(0.0, psi.amplitudes, prep.params);
        for (;; ++step) {
            const double t = static_cast<double>(step) * cfg.dt;
            psi.time = t;
            check_reservoir(cfg, psi.amplitudes, n_initial);
            ChainResult chain =
                control_chain(cfg, controller, prep.reservoir, prep.params, t, psi.amplitudes, hooks, params);
            follow_branch(controller, psi.amplitudes, chain, rec.summary);

            const ConditionResiduals r = condition_residuals(psi.amplitudes, params, chain.gamma.value, m);
            RunSummary& s = rec.summary;
            s.max_r1 = std::max(s.max_r1, std::abs(r.r1));
            s.max_r2 = std::max(s.max_r2, std::abs(r.r2));
            s.max_r3 = std::max(s.max_r3, std::abs(r.r3));
            s.max_r4 = std::max(s.max_r4, std::abs(r.r4));
            if (std::isfinite(chain.control.det_analytic) && chain.control.det_numeric != 0.0)
                s.max_det_relative_error =
                    std::max(s.max_det_relative_error,
                             std::abs(chain.control.det_analytic - chain.control.det_numeric) / std::abs(chain.control.det_numeric));
            s.max_norm_drift = std::max(s.max_norm_drift, std::abs(total_norm(psi.amplitudes) - norm0) / norm0);
            s.steps = step;

            if (step % cfg.stride == 0 || step == steps) {
                rec.samples.push_back(make_sample(step, t, psi.amplitudes, params, chain, m));
                rec.samples.back().residuals = r;
            }
            while (!snapshot_steps.empty() && snapshot_steps.front() <= step) {
                if (snapshot_steps.front() == step) rec.snapshots.push_back({t, psi.amplitudes});
                snapshot_steps.erase(snapshot_steps.begin());
            }
            if (step == steps) break;

            LatticeWavefunction next = rk4_step(psi, provider, cfg.dt);
            if (!is_finite(next.amplitudes)) {
                rec.termination = Termination::blow_up;
                rec.message = "state became non-finite";
                step += 1;
                break;
            }
            psi = std::move(next);
        }
    } catch (const StageBlowUp& e) {
        rec.termination = Termination::blow_up;
        rec.message = e.what();
        step += 1;
    } catch (const ReservoirEmpty& e) {
        rec.termination = Termination::reservoir_empty;
        rec.empty_well = e.well();
        rec.message = e.what();
    } catch (const ControlBreakdown& e) {
        rec.termination = Termination::control_breakdown;
        rec.message = e.what();
    }
    rec.end_time = static_cast<double>(step) * cfg.dt;
    psi.time = rec.end_time;
    rec.final_state = psi;
    return rec;
}

double EmbeddedDeviation::max() const { return std::max({n1, n2, jt, C}); }

EmbeddedDeviation compare_embedded(const RunRecord& rec, const ScenarioConfig& cfg) {
    if (rec.dt != cfg.dt) throw std::invalid_argument("record and config use different time steps");
    if (rec.gamma.shape != cfg.gamma.shape || rec.gamma.target != cfg.gamma.target ||
        rec.gamma.ramp_time != cfg.gamma.ramp_time)
        throw std::invalid_argument("record and config use different Gamma schedules");
    if (rec.m != cfg.m || rec.wells != cfg.wells) throw std::invalid_argument("record and config describe different lattices");
    EmbeddedDeviation dev;
    if (rec.samples.empty()) return dev;
    if (rec.samples.front().step != 0) throw std::invalid_argument("record does not start at t = 0");

    const double J = cfg.tunneling[cfg.m];
    const double g = cfg.interaction[cfg.m];
    TwoModeState s{rec.samples.front().psi_m, rec.samples.front().psi_m1, 0.0};
    std::size_t step = 0;
    for (const Sample& smp : rec.samples) {
        while (step < smp.step) {
            s = two_mode_step(s, cfg.gamma, J, g, cfg.dt);
            ++step;
            s.time = static_cast<double>(step) * cfg.dt;
        }
        const TwoModeObservables o = two_mode_observables(s);
        const TwoModeObservables l = two_mode_observables({smp.psi_m, smp.psi_m1, smp.t});
        dev.n1 = std::max(dev.n1, std::abs(l.n1 - o.n1));
        dev.n2 = std::max(dev.n2, std::abs(l.n2 - o.n2));
        dev.jt = std::max(dev.jt, std::abs(l.jt - o.jt));
        dev.C = std::max(dev.C, std::abs(l.C - o.C));
    }
    return dev;
}

std::vector<std::string> csv_header(std::size_t N) {
    std::vector<std::string> h{"t"};
    for (std::size_t k = 1; k <= N; ++k) h.push_back("n_" + std::to_string(k));
    for (std::size_t k = 1; k < N; ++k) h.push_back("j_" + std::to_string(k) + "_" + std::to_string(k + 1));
    h.push_back("J_left");
    h.push_back("J_right");
    for (std::size_t k = 1; k <= N; ++k) h.push_back("E_" + std::to_string(k));
    h.push_back("Gamma");
    h.push_back("d");
    h.push_back("det");
    return h;
}

void export_csv(const RunRecord& rec, const std::string& path) {
    std::ofstream out = open_for_writing(path);
    const std::vector<std::string> header = csv_header(rec.wells);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const Sample& s : rec.samples) {
        out << format_double(s.t);
        for (double v : s.n) out << ',' << format_double(v);
        for (double v : s.j) out << ',' << format_double(v);
        out << ',' << format_double(s.J_left) << ',' << format_double(s.J_right);
        for (double v : s.E) out << ',' << format_double(v);
        out << ',' << format_double(s.gamma) << ',' << format_double(s.d) << ',' << format_double(s.det) << '\n';
    }
    finish_writing(out, path);
}

void export_momentum_csv(const std::vector<Snapshot>& snapshots, const std::string& path) {
    std::ofstream out = open_for_writing(path);
    out << "t,q,power\n";
    for (const Snapshot& snap : snapshots) {
        const MomentumSpectrum spec = momentum_transform(snap.psi);
        for (std::size_t i = 0; i < spec.q.size(); ++i)
            out << format_double(snap.t) << ',' << format_double(spec.q[i]) << ','
                << format_double(std::norm(spec.amplitude[i])) << '\n';
    }
    finish_writing(out, path);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path + " for reading");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) table.header.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a number: " + cell);
            row.push_back(v);
        }
        if (row.size() != table.header.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(table.header.size()) + " fields");
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace ptlattice
