#include "ptlattice/control.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ptlattice/errors.hpp"

namespace ptlattice {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_embedding(std::size_t sites, std::size_t m) {
    if (m < 1 || m + 2 >= sites)
        throw std::invalid_argument("embedded wells need a neighbour on each side (m=" +
                                    std::to_string(m) + ", sites=" + std::to_string(sites) + ")");
}

// Short-hands over 0-based site indices.
struct Probe {
    std::span<const cplx> psi;

    double n(std::size_t k) const { return std::norm(psi[k]); }
    double C(std::size_t k, std::size_t l) const {
        return correlation(psi, static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(l));
    }
    double jt(std::size_t k, std::size_t l) const {
        return modified_current(psi, static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(l));
    }
};

double gauge_d(const Probe& p, const DStrategy& s, std::size_t m) {
    if (s.kind == DStrategy::Kind::constant) return s.d0;
    const double c_right = p.C(m, m + 2);
    const double c_left = p.C(m - 1, m + 1);
    if (c_right == 0.0 || c_left == 0.0)
        throw SingularGauge("compensating gauge: C_{m,m+2} or C_{m-1,m+1} vanishes");
    return s.j_left0 / (2.0 * c_right) + s.j_right0 / (2.0 * c_left);
}

// params must already hold the controlled tunnelings.
GaugeValue gauge_derivative(const Probe& p, const LatticeParameters& params, const DStrategy& s,
                            std::size_t m, double d) {
    if (s.kind == DStrategy::Kind::constant) return {d, 0.0, 0.0, 0.0};
    const double c_right = p.C(m, m + 2);
    const double c_left = p.C(m - 1, m + 1);
    const double a = s.j_left0 / (2.0 * c_right * c_right);
    const double b = s.j_right0 / (2.0 * c_left * c_left);
    const double jt_right = p.jt(m, m + 2);
    const double jt_left = p.jt(m - 1, m + 1);
    const double eta_right = zeta_eta(p.psi, params, m, m + 2).eta;
    const double eta_left = zeta_eta(p.psi, params, m - 1, m + 1).eta;
    const auto& g = params.g;
    GaugeValue out{d, b * jt_left, -a * jt_right, 0.0};
    out.D = -a * (g[m + 2] * p.n(m + 2) - g[m] * p.n(m)) * jt_right -
            b * (g[m + 1] * p.n(m + 1) - g[m - 1] * p.n(m - 1)) * jt_left - a * eta_right -
            b * eta_left;
    return out;
}

double wrap_angle(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    x = std::fmod(x, two_pi);
    if (x > std::numbers::pi) x -= two_pi;
    if (x <= -std::numbers::pi) x += two_pi;
    return x;
}

double closest(std::initializer_list<double> candidates, double reference) {
    double best = kNaN;
    double best_distance = std::numeric_limits<double>::infinity();
    for (double c : candidates) {
        const double dist = std::abs(wrap_angle(c - reference));
        if (dist < best_distance) {
            best_distance = dist;
            best = c;
        }
    }
    return best;
}

// Phase difference delta with 2 J sqrt(n_k n_l) sin(delta) = j, nearest to `reference`.
double link_phase(double j, double J, double nk, double nl, double reference, std::size_t k) {
    if (j == 0.0) return closest({0.0, std::numbers::pi}, reference);
    const double denom = 2.0 * J * std::sqrt(nk * nl);
    if (denom == 0.0)
        throw InfeasibleInitialization("link " + std::to_string(k) + "-" + std::to_string(k + 1) +
                                       " cannot carry a current (empty well or zero tunneling)");
    const double s = j / denom;
    if (std::abs(s) > 1.0)
        throw InfeasibleInitialization("current " + std::to_string(j) + " on link " + std::to_string(k) +
                                       "-" + std::to_string(k + 1) + " exceeds the maximum " +
                                       std::to_string(std::abs(denom)));
    const double a = std::asin(s);
    return closest({a, std::numbers::pi - a}, reference);
}

}  // namespace

DStrategy DStrategy::constant(double d0) {
    if (d0 == 0.0 || !std::isfinite(d0)) throw std::invalid_argument("constant gauge d0 must be finite and non-zero");
    DStrategy s;
    s.kind = Kind::constant;
    s.d0 = d0;
    return s;
}

DStrategy DStrategy::compensating(double j_left0, double j_right0) {
    DStrategy s;
    s.kind = Kind::compensating;
    s.j_left0 = j_left0;
    s.j_right0 = j_right0;
    return s;
}

GaugeValue gauge_value(std::span<const cplx> psi, const LatticeParameters& params,
                       const DStrategy& strategy, std::size_t m) {
    require_embedding(psi.size(), m);
    const Probe p{psi};
    const double d = gauge_d(p, strategy, m);
    if (strategy.kind == DStrategy::Kind::constant) return {d, 0.0, 0.0, 0.0};
    LatticeParameters local = params;
    const auto t = controlled_tunnelings(psi, d, m);
    local.J[m - 1] = t.left;
    local.J[m + 1] = t.right;
    return gauge_derivative(p, local, strategy, m, d);
}

ControlledTunnelings controlled_tunnelings(std::span<const cplx> psi, double d, std::size_t m) {
    require_embedding(psi.size(), m);
    const Probe p{psi};
    return {d * p.C(m, m + 2), d * p.C(m - 1, m + 1)};
}

double EnergySystem::scale() const {
    return std::hypot(M[0][0], M[0][1]) * std::hypot(M[1][0], M[1][1]);
}

EnergySystem assemble_energy_system(std::span<const cplx> psi, const LatticeParameters& params,
                                    const GaugeValue& gauge, GammaValue gamma, std::size_t m,
                                    PopulationRate rate) {
    require_embedding(psi.size(), m);
    const Probe p{psi};
    const auto& g = params.g;
    const double d = gauge.d;
    const double G = gamma.value;

    const double n_l = p.n(m - 1), n_m = p.n(m), n_p = p.n(m + 1), n_r = p.n(m + 2);
    const double C_lm = p.C(m - 1, m);          // C_{m-1,m}
    const double C_m2 = p.C(m, m + 2);          // C_{m,m+2}
    const double C_l1 = p.C(m - 1, m + 1);      // C_{m-1,m+1}
    const double C_pr = p.C(m + 1, m + 2);      // C_{m+1,m+2}
    const double jt_lm = p.jt(m - 1, m);        // jt_{m-1,m}
    const double jt_m2 = p.jt(m, m + 2);        // jt_{m,m+2}
    const double jt_l1 = p.jt(m - 1, m + 1);    // jt_{m-1,m+1}
    const double jt_pr = p.jt(m + 1, m + 2);    // jt_{m+1,m+2}

    const double eta_m2 = zeta_eta(psi, params, m, m + 2).eta;
    const double eta_l1 = zeta_eta(psi, params, m - 1, m + 1).eta;
    const double zeta_lm = zeta_eta(psi, params, m - 1, m).zeta;
    const double zeta_pr = zeta_eta(psi, params, m + 1, m + 2).zeta;

    const double j_in = current(psi, params, m - 1);
    const double j_mid = current(psi, params, m);
    const double j_out = current(psi, params, m + 1);
    double rate_m = j_in - j_mid;
    double rate_p = j_mid - j_out;
    if (rate == PopulationRate::substituted) {
        rate_m = 2.0 * G * n_m - j_mid;
        rate_p = j_mid - 2.0 * G * n_p;
    }

    EnergySystem s{};
    s.M[0][0] = C_m2 * (gauge.Dm1 * jt_lm + d * C_lm);
    s.M[0][1] = jt_lm * (gauge.Dp2 * C_m2 + d * jt_m2);
    s.M[1][0] = gauge.Dm1 * C_l1 * jt_pr - d * jt_l1 * jt_pr;
    s.M[1][1] = gauge.Dp2 * C_l1 * jt_pr - d * C_l1 * C_pr;

    s.v[0] = 2.0 * gamma.rate * n_m + 2.0 * G * rate_m - gauge.D * jt_lm * C_m2 - d * jt_lm * eta_m2 -
             d * jt_lm * jt_m2 * (g[m + 2] * n_r - g[m] * n_m) -
             d * C_lm * C_m2 * (g[m - 1] * n_l - g[m] * n_m) + d * C_m2 * zeta_lm;
    s.v[1] = 2.0 * gamma.rate * n_p + 2.0 * G * rate_p - gauge.D * C_l1 * jt_pr - d * jt_pr * eta_l1 -
             d * jt_l1 * jt_pr * (g[m + 1] * n_p - g[m - 1] * n_l) -
             d * C_l1 * C_pr * (g[m + 1] * n_p - g[m + 2] * n_r) + d * C_l1 * zeta_pr;
    return s;
}

EnergyPair solve_energies(const EnergySystem& s, double eps) {
    const double det = s.determinant();
    const double scale = s.scale();
    if (!std::isfinite(det) || !(std::abs(det) > eps * scale))
        throw ControlBreakdown("control breakdown: energy system singular (|det M| = " +
                               std::to_string(std::abs(det)) + ", scale " + std::to_string(scale) + ")");
    return {(s.v[0] * s.M[1][1] - s.M[0][1] * s.v[1]) / det,
            (s.M[0][0] * s.v[1] - s.v[0] * s.M[1][0]) / det};
}

AnalyticDeterminant analytic_determinant(std::span<const cplx> psi, double d, double gamma,
                                         DStrategy::Kind kind, std::size_t m, Branch branch) {
    require_embedding(psi.size(), m);
    const Probe p{psi};
    const double n_l = p.n(m - 1), n_m = p.n(m), n_p = p.n(m + 1), n_r = p.n(m + 2);
    const double product = n_l * n_m * n_p * n_r;
    if (product == 0.0) return {0.0, kNaN, kNaN, kNaN, kNaN, true};

    AnalyticDeterminant a{};
    a.beta = gamma / (d * std::sqrt(n_l * n_r));
    a.gamma = p.jt(m, m + 1) / (2.0 * std::sqrt(n_m * n_p));
    a.alpha = (a.beta + a.gamma) * a.gamma;
    a.radicand = (1.0 - a.alpha) * (1.0 - a.alpha) - a.beta * a.beta;
    a.valid = a.radicand >= 0.0;
    if (!a.valid) {
        a.det = kNaN;
        return a;
    }
    const double root = (branch == Branch::plus ? 1.0 : -1.0) * std::sqrt(a.radicand);
    if (kind == DStrategy::Kind::constant)
        a.det = 16.0 * d * d * product * root;
    else
        a.det = 8.0 * product * d * d * (root + a.gamma * a.gamma - 1.0);
    return a;
}

ConditionResiduals condition_residuals(std::span<const cplx> psi, const LatticeParameters& params,
                                       double gamma, std::size_t m) {
    require_embedding(psi.size(), m);
    const Probe p{psi};
    const double J_left = params.J[m - 1];
    const double J_right = params.J[m + 1];
    return {J_left * p.jt(m - 1, m) - 2.0 * gamma * p.n(m),
            J_right * p.jt(m + 1, m + 2) - 2.0 * gamma * p.n(m + 1),
            J_left * p.C(m - 1, m + 1) - J_right * p.C(m, m + 2),
            J_left * p.jt(m - 1, m + 1) - J_right * p.jt(m, m + 2)};
}

LatticeWavefunction initialize_state(const LatticeWavefunction& seed, double gamma0,
                                     const LatticeParameters& params, std::size_t m,
                                     const DStrategy& strategy, const CurrentWeights* targets) {
    validate(seed, params);
    const std::size_t N = seed.size();
    require_embedding(N, m);
    if (gamma0 < 0.0) throw std::invalid_argument("initial Gamma must be non-negative");

    std::vector<double> n(N), phase(N);
    for (std::size_t k = 0; k < N; ++k) {
        n[k] = std::norm(seed[k]);
        phase[k] = n[k] > 0.0 ? std::arg(seed[k]) : 0.0;
    }
    for (std::size_t k = m - 1; k <= m + 2; ++k)
        if (!(n[k] > 0.0))
            throw InfeasibleInitialization("well " + std::to_string(k) + " adjacent to the embedded pair is empty");

    // With x = phi_m - phi_{m-1} = phi_{m+2} - phi_{m+1} and y = phi_{m+1} - phi_m both
    // conditions reduce to one equation in x.
    const double y = phase[m + 1] - phase[m];
    const double x_seed = phase[m] - phase[m - 1];
    const double reservoir = std::sqrt(n[m - 1] * n[m + 2]);
    double x = 0.0;
    if (strategy.kind == DStrategy::Kind::constant) {
        // sin(2x + y) = beta + sin y
        const double s = gamma0 / (strategy.d0 * reservoir) + std::sin(y);
        if (std::abs(s) > 1.0)
            throw InfeasibleInitialization("constant gauge d0 = " + std::to_string(strategy.d0) +
                                           " too small for Gamma = " + std::to_string(gamma0));
        const double a = std::asin(s);
        const double u = 0.5 * (a - y);
        const double v = 0.5 * (std::numbers::pi - a - y);
        x = closest({u, u + std::numbers::pi, v, v + std::numbers::pi}, x_seed);
    } else {
        // d = K / cos(x + y) turns the condition into 2 K sqrt(n_{m-1} n_{m+2}) sin x = Gamma
        const double K = strategy.j_left0 / (4.0 * std::sqrt(n[m] * n[m + 2])) +
                         strategy.j_right0 / (4.0 * std::sqrt(n[m - 1] * n[m + 1]));
        const double s = gamma0 / (2.0 * K * reservoir);
        if (!std::isfinite(s) || std::abs(s) > 1.0)
            throw InfeasibleInitialization("compensating gauge cannot carry Gamma = " + std::to_string(gamma0));
        const double a = std::asin(s);
        x = closest({a, std::numbers::pi - a}, x_seed);
        if (std::abs(std::cos(x + y)) < 1e-12)
            throw InfeasibleInitialization("compensating gauge is singular for this state");
    }

    std::vector<double> out_phase = phase;
    out_phase[m - 1] = phase[m] - x;
    out_phase[m + 2] = phase[m + 1] + x;

    if (targets != nullptr) {
        validate_weights(*targets, N, m);
        const double j_left = 2.0 * gamma0 * n[m];
        const double j_right = 2.0 * gamma0 * n[m + 1];
        // sign convention: j_{k,k+1} = 2 J sqrt(n_k n_{k+1}) sin(phi_{k+1} - phi_k)
        for (std::size_t k = m - 1; k-- > 0;) {
            const double delta = link_phase(targets->left[k] * j_left, params.J[k], n[k], n[k + 1],
                                            phase[k + 1] - phase[k], k);
            out_phase[k] = out_phase[k + 1] - delta;
        }
        for (std::size_t k = m + 2; k + 1 < N; ++k) {
            const double delta = link_phase(targets->right[k - m - 2] * j_right, params.J[k], n[k],
                                            n[k + 1], phase[k + 1] - phase[k], k);
            out_phase[k + 1] = out_phase[k] + delta;
        }
    }

    LatticeWavefunction out{std::vector<cplx>(N), seed.time};
    for (std::size_t k = 0; k < N; ++k) out[k] = std::polar(std::sqrt(n[k]), out_phase[k]);
    return out;
}

EmbeddingController::EmbeddingController(std::size_t m, DStrategy strategy, GammaSchedule schedule,
                                         PopulationRate rate)
    : m_(m), strategy_(strategy), schedule_(schedule), rate_(rate) {
    if (m_ < 1) throw std::invalid_argument("embedded wells need a left neighbour");
}

ControlState EmbeddingController::apply(double t, std::span<const cplx> psi,
                                        LatticeParameters& params) const {
    require_embedding(psi.size(), m_);
    const std::size_t m = m_;
    const Probe p{psi};
    const GammaValue G = gamma(t, schedule_);

    ControlState cs;
    cs.d = gauge_d(p, strategy_, m);
    cs.J_left = cs.d * p.C(m, m + 2);
    cs.J_right = cs.d * p.C(m - 1, m + 1);
    params.J[m - 1] = cs.J_left;
    params.J[m + 1] = cs.J_right;
    params.E[m] = 0.0;
    params.E[m + 1] = 0.0;

    const GaugeValue gv = gauge_derivative(p, params, strategy_, m, cs.d);
    cs.Dm1 = gv.Dm1;
    cs.Dp2 = gv.Dp2;
    cs.D = gv.D;

    const EnergySystem sys = assemble_energy_system(psi, params, gv, G, m, rate_);
    cs.det_numeric = sys.determinant();
    cs.det_scale = sys.scale();
    const EnergyPair E = solve_energies(sys);
    cs.E_left = E.left;
    cs.E_right = E.right;
    params.E[m - 1] = E.left;
    params.E[m + 2] = E.right;

    cs.sign = branch_;
    cs.det_analytic = branch_ ? analytic_determinant(psi, cs.d, G.value, strategy_.kind, m, *branch_).det : kNaN;
    return cs;
}

void EmbeddingController::select_branch(double t, std::span<const cplx> psi,
                                        const LatticeParameters& params) {
    LatticeParameters local = params;
    const ControlState cs = apply(t, psi, local);
    const double G = gamma(t, schedule_).value;
    const auto plus = analytic_determinant(psi, cs.d, G, strategy_.kind, m_, Branch::plus);
    const auto minus = analytic_determinant(psi, cs.d, G, strategy_.kind, m_, Branch::minus);
    const double dp = plus.valid ? std::abs(plus.det - cs.det_numeric) : std::numeric_limits<double>::infinity();
    const double dm = minus.valid ? std::abs(minus.det - cs.det_numeric) : std::numeric_limits<double>::infinity();
    branch_ = dp <= dm ? Branch::plus : Branch::minus;
}

}  // namespace ptlattice
