#pragma once

// Non-Hermitian PT-symmetric two-mode (dimer) model
//
//   i dpsi_1/dt = ( i Gamma + g |psi_1|^2) psi_1 - J psi_2
//   i dpsi_2/dt = (-i Gamma + g |psi_2|^2) psi_2 - J psi_1
//
// integrated directly in its complex form. This is the reference the embedded
// wells of a Hermitian lattice are compared against.

#include <array>
#include <vector>

#include "ptlattice/lattice.hpp"
#include "ptlattice/schedule.hpp"

namespace ptlattice {

struct TwoModeState {
    cplx psi1;
    cplx psi2;
    double time = 0.0;
};

struct TwoModeParams {
    double gamma = 0.0;
    double J = 1.0;
    double g = 0.0;
};

// Real observable quadruple (n1, n2, jt_12, C_12), or its time derivative.
struct TwoModeObservables {
    double n1;
    double n2;
    double jt;
    double C;
};

TwoModeObservables two_mode_observables(const TwoModeState& s);

std::array<cplx, 2> two_mode_rhs(const TwoModeState& s, const TwoModeParams& p);

// Closed real equations: dn1 = -J jt + 2 Gamma n1, dn2 = J jt - 2 Gamma n2,
// d jt = 2 J (n1-n2) + g (n1-n2) C, d C = -g (n1-n2) jt.
TwoModeObservables two_mode_rhs_observables(const TwoModeObservables& o, const TwoModeParams& p);

// Eigenvalues of the g = 0 dimer: +-sqrt(J^2 - Gamma^2), imaginary past the exceptional point.
std::array<cplx, 2> linear_spectrum(double J, double gamma);

// RK4 step with Gamma taken from the schedule at each stage.
TwoModeState two_mode_step(const TwoModeState& s, const GammaSchedule& schedule, double J, double g,
                           double dt);

}  // namespace ptlattice
