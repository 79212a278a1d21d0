#include "ptlattice/ground_state.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptlattice {

namespace {

// H(psi) psi with the nonlinear diagonal evaluated at psi.
void apply_hamiltonian(std::span<const cplx> psi, const LatticeParameters& params, std::span<cplx> out) {
    const std::size_t n = psi.size();
    for (std::size_t k = 0; k < n; ++k) {
        cplx h = (params.E[k] + params.g[k] * std::norm(psi[k])) * psi[k];
        if (k > 0) h -= params.J[k - 1] * psi[k - 1];
        if (k + 1 < n) h -= params.J[k] * psi[k + 1];
        out[k] = h;
    }
}

double dot_real(std::span<const cplx> a, std::span<const cplx> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (std::conj(a[k]) * b[k]).real();
    return s;
}

// d psi / d tau = -(H(psi) - mu(psi)) psi, which vanishes exactly at stationary states.
void projected_flow(std::span<const cplx> psi, const LatticeParameters& params, std::span<cplx> out) {
    apply_hamiltonian(psi, params, out);
    const double mu = dot_real(psi, out) / dot_real(psi, psi);
    for (std::size_t k = 0; k < psi.size(); ++k) out[k] = -(out[k] - mu * psi[k]);
}

void renormalise(std::vector<cplx>& psi, double norm) {
    const double scale = std::sqrt(norm / total_norm(psi));
    for (cplx& a : psi) a *= scale;
}

}  // namespace

Stationarity stationarity_residual(std::span<const cplx> psi, const LatticeParameters& params) {
    const double nn = total_norm(psi);
    if (!(nn > 0.0)) throw std::invalid_argument("stationarity of a zero-norm state is undefined");
    std::vector<cplx> h(psi.size());
    apply_hamiltonian(psi, params, h);
    const double mu = dot_real(psi, h) / nn;
    double r2 = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) r2 += std::norm(h[k] - mu * psi[k]);
    return {mu, std::sqrt(r2 / nn)};
}

double energy_functional(std::span<const cplx> psi, const LatticeParameters& params) {
    const std::size_t n = psi.size();
    double e = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double nk = std::norm(psi[k]);
        e += params.E[k] * nk + 0.5 * params.g[k] * nk * nk;
        if (k + 1 < n) e -= 2.0 * params.J[k] * (std::conj(psi[k]) * psi[k + 1]).real();
    }
    return e;
}

GroundStateResult ground_state(const GroundStateRequest& req) {
    validate(req.params);
    if (!(req.total_norm > 0.0)) throw std::invalid_argument("total norm must be positive");
    if (!(req.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (!(req.imaginary_step > 0.0)) throw std::invalid_argument("imaginary time step must be positive");

    const std::size_t n = req.params.sites();
    const double dtau = req.imaginary_step;
    std::vector<cplx> psi(n, cplx(std::sqrt(req.total_norm / static_cast<double>(n)), 0.0));
    std::vector<cplx> k1(n), k2(n), k3(n), k4(n), stage(n);

    for (std::size_t it = 0; it <= req.max_iterations; ++it) {
        const Stationarity s = stationarity_residual(psi, req.params);
        if (s.residual < req.tolerance)
            return {LatticeWavefunction{psi, 0.0}, s.chemical_potential, s.residual, it};
        if (it == req.max_iterations) break;

        projected_flow(psi, req.params, k1);
        for (std::size_t k = 0; k < n; ++k) stage[k] = psi[k] + 0.5 * dtau * k1[k];
        projected_flow(stage, req.params, k2);
        for (std::size_t k = 0; k < n; ++k) stage[k] = psi[k] + 0.5 * dtau * k2[k];
        projected_flow(stage, req.params, k3);
        for (std::size_t k = 0; k < n; ++k) stage[k] = psi[k] + dtau * k3[k];
        projected_flow(stage, req.params, k4);
        for (std::size_t k = 0; k < n; ++k)
            psi[k] += (dtau / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        renormalise(psi, req.total_norm);
        if (!is_finite(psi)) throw NonConvergence("imaginary-time propagation diverged");
    }
    throw NonConvergence("ground state not converged within " + std::to_string(req.max_iterations) +
                         " iterations");
}

}  // namespace ptlattice
