#pragma once

// Single-band lattice theory and the semiclassical wave-packet picture used to
// interpret large tilted-lattice runs.
//
// Positions are 0-based site coordinates. A tilt E_k = DeltaE * k exerts the force
// -DeltaE, so the quasi-momentum obeys dq0/dt = -DeltaE(t) / hbar.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ptlattice/lattice.hpp"

namespace ptlattice {

// E(q) = -2 J cos q
double dispersion(double q, double J);
// v_g = E'(q) / hbar = 2 J sin q / hbar
double group_velocity(double q, double J);
// m_eff = hbar^2 / E''(q) = hbar^2 / (2 J cos q); signed infinity where cos q = 0.
double effective_mass(double q, double J);
// 1 / m_eff, finite everywhere.
double inverse_effective_mass(double q, double J);

// Wraps into [-pi, pi).
double wrap_quasi_momentum(double q);

struct PacketState {
    double q0 = 0.0;                    // quasi-momentum, wrapped into [-pi, pi)
    double n0 = 0.0;                    // packet centre
    double width = 0.0;                 // Delta q
    double inverse_mass_integral = 0.0; // int_0^t dt' / m_eff(q0(t'))
    double time = 0.0;
};

// Tilt slope DeltaE(t).
using TiltSchedule = std::function<double(double)>;

// One RK4 step of dq0/dt = -DeltaE(t), dn0/dt = v_g(q0), d(int)/dt = 1/m_eff(q0).
PacketState evolve_packet(const PacketState& p, const TiltSchedule& tilt, double J, double dt);

// psi_n = (2 dq^2 / pi)^{1/4} exp[-dq^2 (n - n0)^2] exp(i q0 n)
LatticeWavefunction gaussian_packet(std::size_t sites, double n0, double q0, double width);

struct PacketProfile {
    std::vector<cplx> amplitudes;
    bool valid;  // false when the momentum peak is within 5 dq of the zone edge
};

// Closed-form Gaussian evaluation of the semiclassical packet (integral extended to the
// real line), up to a global phase. At zero elapsed time this is gaussian_packet exactly.
PacketProfile semiclassical_profile(const PacketState& p, std::size_t sites);

struct MomentumSpectrum {
    std::vector<double> q;          // q = 2 pi j / L, j = -ceil(L/2)+1 .. floor(L/2)
    std::vector<cplx> amplitude;    // (1 / 2 pi) sum_k exp(-i q k) psi_k

    std::size_t peak() const;
    // sum_q |amp|^2 = parseval_constant() * sum_k |psi_k|^2
    double parseval_constant() const;
};

MomentumSpectrum momentum_transform(std::span<const cplx> psi);

}  // namespace ptlattice
