#include "ptlattice/two_mode.hpp"

#include <cmath>

namespace ptlattice {

TwoModeObservables two_mode_observables(const TwoModeState& s) {
    const cplx z = s.psi1 * std::conj(s.psi2);
    return {std::norm(s.psi1), std::norm(s.psi2), -2.0 * z.imag(), 2.0 * z.real()};
}

std::array<cplx, 2> two_mode_rhs(const TwoModeState& s, const TwoModeParams& p) {
    const cplx i(0.0, 1.0);
    const cplx h1 = (i * p.gamma + p.g * std::norm(s.psi1)) * s.psi1 - p.J * s.psi2;
    const cplx h2 = (-i * p.gamma + p.g * std::norm(s.psi2)) * s.psi2 - p.J * s.psi1;
    return {-i * h1, -i * h2};
}

TwoModeObservables two_mode_rhs_observables(const TwoModeObservables& o, const TwoModeParams& p) {
    const double dn = o.n1 - o.n2;
    const double j12 = p.J * o.jt;
    return {-j12 + 2.0 * p.gamma * o.n1, j12 - 2.0 * p.gamma * o.n2, 2.0 * p.J * dn + p.g * dn * o.C,
            -p.g * dn * o.jt};
}

std::array<cplx, 2> linear_spectrum(double J, double gamma) {
    const double disc = J * J - gamma * gamma;
    if (disc >= 0.0) {
        const double w = std::sqrt(disc);
        return {cplx(w, 0.0), cplx(-w, 0.0)};
    }
    const double w = std::sqrt(-disc);
    return {cplx(0.0, w), cplx(0.0, -w)};
}

TwoModeState two_mode_step(const TwoModeState& s, const GammaSchedule& schedule, double J, double g,
                           double dt) {
    auto f = [&](double t, cplx a, cplx b) {
        return two_mode_rhs(TwoModeState{a, b, t}, TwoModeParams{gamma(t, schedule).value, J, g});
    };
    const double t = s.time;
    const auto k1 = f(t, s.psi1, s.psi2);
    const auto k2 = f(t + 0.5 * dt, s.psi1 + 0.5 * dt * k1[0], s.psi2 + 0.5 * dt * k1[1]);
    const auto k3 = f(t + 0.5 * dt, s.psi1 + 0.5 * dt * k2[0], s.psi2 + 0.5 * dt * k2[1]);
    const auto k4 = f(t + dt, s.psi1 + dt * k3[0], s.psi2 + dt * k3[1]);
    return {s.psi1 + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s.psi2 + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]), t + dt};
}

}  // namespace ptlattice
