#pragma once

// Generators and independent reference implementations shared by the unit tests.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "ptlattice/lattice.hpp"

namespace testing {

using ptlattice::cplx;

inline std::vector<cplx> random_state(std::mt19937& rng, std::size_t n, double amp_lo = 0.3,
                                      double amp_hi = 1.5) {
    std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
    std::vector<cplx> psi(n);
    for (auto& a : psi) a = std::polar(amp(rng), phase(rng));
    return psi;
}

inline ptlattice::LatticeParameters random_params(std::mt19937& rng, std::size_t n, bool interacting) {
    std::uniform_real_distribution<double> e(-2.0, 2.0);
    std::uniform_real_distribution<double> j(0.5, 1.5);
    std::uniform_real_distribution<double> g(0.0, 2.0);
    ptlattice::LatticeParameters p;
    p.E.resize(n);
    p.g.resize(n);
    p.J.resize(n - 1);
    for (auto& x : p.E) x = e(rng);
    for (auto& x : p.J) x = j(rng);
    for (auto& x : p.g) x = interacting ? g(rng) : 0.0;
    return p;
}

// Dense mean-field Hamiltonian H(psi) for the open chain.
inline Eigen::MatrixXcd dense_hamiltonian(const std::vector<cplx>& psi, const ptlattice::LatticeParameters& p) {
    const auto n = static_cast<Eigen::Index>(psi.size());
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        H(k, k) = p.E[static_cast<std::size_t>(k)] + p.g[static_cast<std::size_t>(k)] * std::norm(psi[static_cast<std::size_t>(k)]);
        if (k + 1 < n) H(k, k + 1) = H(k + 1, k) = -p.J[static_cast<std::size_t>(k)];
    }
    return H;
}

// dpsi/dt = -i H(psi) psi
inline std::vector<cplx> dense_rhs(const std::vector<cplx>& psi, const ptlattice::LatticeParameters& p) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(psi.size()));
    for (std::size_t k = 0; k < psi.size(); ++k) v(static_cast<Eigen::Index>(k)) = psi[k];
    const Eigen::VectorXcd d = cplx(0.0, -1.0) * (dense_hamiltonian(psi, p) * v);
    return {d.data(), d.data() + d.size()};
}

inline std::vector<cplx> axpy(const std::vector<cplx>& y, const std::vector<cplx>& x, double h) {
    std::vector<cplx> out(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) out[k] = y[k] + h * x[k];
    return out;
}

// Classical RK4 of a frozen-parameter GPE with the dense oracle.
inline std::vector<cplx> dense_rk4(const std::vector<cplx>& psi, const ptlattice::LatticeParameters& p, double dt) {
    const auto k1 = dense_rhs(psi, p);
    const auto k2 = dense_rhs(axpy(psi, k1, dt / 2), p);
    const auto k3 = dense_rhs(axpy(psi, k2, dt / 2), p);
    const auto k4 = dense_rhs(axpy(psi, k3, dt), p);
    std::vector<cplx> out(psi.size());
    for (std::size_t k = 0; k < psi.size(); ++k)
        out[k] = psi[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    return out;
}

inline double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace testing
