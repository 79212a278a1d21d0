#include "ptlattice/semiclassical.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ptlattice {

namespace {

constexpr double kPi = std::numbers::pi;

cplx packet_amplitude(double x, double centre, double q0, double width, double tau) {
    const double norm = std::pow(2.0 * width * width / kPi, 0.25);
    const double dx = x - centre;
    if (tau == 0.0) return std::polar(norm * std::exp(-width * width * dx * dx), q0 * x);
    const cplx w(1.0, 2.0 * width * width * tau);
    return norm / std::sqrt(w) * std::exp(-width * width * dx * dx / w) * std::polar(1.0, q0 * x);
}

}  // namespace

double dispersion(double q, double J) { return -2.0 * J * std::cos(q); }

double group_velocity(double q, double J) { return 2.0 * J * std::sin(q); }

double inverse_effective_mass(double q, double J) { return 2.0 * J * std::cos(q); }

double effective_mass(double q, double J) {
    const double inv = inverse_effective_mass(q, J);
    if (inv == 0.0) return std::copysign(std::numeric_limits<double>::infinity(), J);
    return 1.0 / inv;
}

double wrap_quasi_momentum(double q) {
    q = std::fmod(q + kPi, 2.0 * kPi);
    if (q < 0.0) q += 2.0 * kPi;
    return q - kPi;
}

PacketState evolve_packet(const PacketState& p, const TiltSchedule& tilt, double J, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    using Y = std::array<double, 3>;  // q0, n0, inverse mass integral
    auto f = [&](double t, const Y& y) -> Y {
        return {-tilt(t), group_velocity(y[0], J), inverse_effective_mass(y[0], J)};
    };
    auto add = [](const Y& a, const Y& b, double h) -> Y {
        return {a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]};
    };
    const Y y{p.q0, p.n0, p.inverse_mass_integral};
    const Y k1 = f(p.time, y);
    const Y k2 = f(p.time + 0.5 * dt, add(y, k1, 0.5 * dt));
    const Y k3 = f(p.time + 0.5 * dt, add(y, k2, 0.5 * dt));
    const Y k4 = f(p.time + dt, add(y, k3, dt));
    PacketState out = p;
    out.q0 = wrap_quasi_momentum(y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]));
    out.n0 = y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    out.inverse_mass_integral = y[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
    out.time = p.time + dt;
    return out;
}

LatticeWavefunction gaussian_packet(std::size_t sites, double n0, double q0, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("packet width must be positive");
    LatticeWavefunction psi{std::vector<cplx>(sites), 0.0};
    for (std::size_t k = 0; k < sites; ++k)
        psi[k] = packet_amplitude(static_cast<double>(k), n0, q0, width, 0.0);
    return psi;
}

PacketProfile semiclassical_profile(const PacketState& p, std::size_t sites) {
    if (!(p.width > 0.0)) throw std::invalid_argument("packet width must be positive");
    PacketProfile out{std::vector<cplx>(sites), kPi - std::abs(wrap_quasi_momentum(p.q0)) > 5.0 * p.width};
    for (std::size_t k = 0; k < sites; ++k)
        out.amplitudes[k] =
            packet_amplitude(static_cast<double>(k), p.n0, p.q0, p.width, p.inverse_mass_integral);
    return out;
}

std::size_t MomentumSpectrum::peak() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < amplitude.size(); ++i)
        if (std::norm(amplitude[i]) > std::norm(amplitude[best])) best = i;
    return best;
}

double MomentumSpectrum::parseval_constant() const {
    return static_cast<double>(q.size()) / (4.0 * kPi * kPi);
}

MomentumSpectrum momentum_transform(std::span<const cplx> psi) {
    const std::size_t L = psi.size();
    const auto Li = static_cast<long>(L);
    MomentumSpectrum s;
    s.q.reserve(L);
    s.amplitude.reserve(L);
    for (long j = -((Li + 1) / 2) + 1; j <= Li / 2; ++j) {
        const double q = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(L);
        cplx sum = 0.0;
        for (std::size_t k = 0; k < L; ++k) sum += std::polar(1.0, -q * static_cast<double>(k)) * psi[k];
        s.q.push_back(q);
        s.amplitude.push_back(sum / (2.0 * kPi));
    }
    return s;
}

}  // namespace ptlattice
