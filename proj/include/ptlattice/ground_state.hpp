#pragma once

// Ground states of the Hermitian nonlinear lattice at fixed total norm, by
// imaginary-time RK4 propagation with renormalisation after every step.

#include <cstddef>
#include <stdexcept>

#include "ptlattice/lattice.hpp"

namespace ptlattice {

struct GroundStateRequest {
    LatticeParameters params;
    double total_norm = 1.0;
    double tolerance = 1e-12;          // on the stationarity residual
    std::size_t max_iterations = 1000000;
    double imaginary_step = 1e-2;
};

struct GroundStateResult {
    LatticeWavefunction psi;
    double chemical_potential;
    double residual;
    std::size_t iterations;
};

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Starts from the uniform positive state, so symmetric parameters give the symmetric
// representative of a degenerate ground state. Throws NonConvergence.
GroundStateResult ground_state(const GroundStateRequest& request);

struct Stationarity {
    double chemical_potential;  // <psi|H(psi)|psi> / <psi|psi>
    double residual;            // ||H(psi) psi - mu psi|| / ||psi||
};

// Throws std::invalid_argument for a zero-norm state.
Stationarity stationarity_residual(std::span<const cplx> psi, const LatticeParameters& params);

// <psi|H_0|psi> + sum_k g_k n_k^2 / 2 ; decreases along normalised imaginary-time flow.
double energy_functional(std::span<const cplx> psi, const LatticeParameters& params);

}  // namespace ptlattice
