#pragma once

// Discrete nonlinear Schroedinger (multi-well GPE) lattice: state, parameters,
// observable algebra and fixed-step RK4 integration.
//
// Units: hbar = 1, energies in units of the embedded tunneling J_{m,m+1}.
// Sites are indexed from 0. Tunneling J[k] couples sites k and k+1 (open chain).

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ptlattice {

using cplx = std::complex<double>;

// Wells with a population below this count as empty.
inline constexpr double kEmptyWell = 1e-9;

struct LatticeWavefunction {
    std::vector<cplx> amplitudes;
    double time = 0.0;

    std::size_t size() const { return amplitudes.size(); }
    const cplx& operator[](std::size_t k) const { return amplitudes[k]; }
    cplx& operator[](std::size_t k) { return amplitudes[k]; }
};

struct LatticeParameters {
    std::vector<double> E;  // onsite energies, one per site
    std::vector<double> J;  // J[k] = J_{k,k+1}, size N-1
    std::vector<double> g;  // interaction strengths, one per site

    std::size_t sites() const { return E.size(); }

    // J_{k,k+1}; zero for links outside the chain.
    double tunneling(std::ptrdiff_t k) const {
        return (k >= 0 && k + 1 < static_cast<std::ptrdiff_t>(E.size()))
                   ? J[static_cast<std::size_t>(k)]
                   : 0.0;
    }

    static LatticeParameters uniform(std::size_t sites, double tunneling, double interaction);
};

// Throws std::invalid_argument on inconsistent sizes or N < 2.
void validate(const LatticeParameters& params);
void validate(const LatticeWavefunction& psi, const LatticeParameters& params);

bool is_finite(std::span<const cplx> psi);

// n_k = |psi_k|^2
double population(std::span<const cplx> psi, std::size_t k);

// jt_kl = i (psi_k psi_l^* - psi_k^* psi_l); zero when either index is off the chain.
double modified_current(std::span<const cplx> psi, std::ptrdiff_t k, std::ptrdiff_t l);

// C_kl = psi_k psi_l^* + psi_k^* psi_l; zero when either index is off the chain.
double correlation(std::span<const cplx> psi, std::ptrdiff_t k, std::ptrdiff_t l);

// Physical current j_{k,k+1} = J_{k,k+1} jt_{k,k+1} / hbar.
double current(std::span<const cplx> psi, const LatticeParameters& params, std::size_t k);

double total_norm(std::span<const cplx> psi);

struct SitePair {
    std::size_t k;
    std::size_t l;
};

struct ObservableSet {
    std::vector<double> n;       // populations
    std::vector<double> j;       // j_{k,k+1}, size N-1
    std::vector<SitePair> pairs;
    std::vector<double> jt;      // jt for each requested pair
    std::vector<double> C;       // C for each requested pair
};

// Throws std::out_of_range for pair indices outside the chain.
ObservableSet observables(std::span<const cplx> psi, const LatticeParameters& params,
                          std::span<const SitePair> pairs = {});

struct ZetaEta {
    double zeta;
    double eta;
};

// zeta_kl = J_{k-1,k} C_{k-1,l} + J_{k,k+1} C_{k+1,l} - J_{l-1,l} C_{k,l-1} - J_{l,l+1} C_{k,l+1}
// eta_kl  : same with jt in place of C.
// Terms reaching outside the chain vanish.
ZetaEta zeta_eta(std::span<const cplx> psi, const LatticeParameters& params, std::size_t k,
                 std::size_t l);

// i dpsi_k/dt = (E_k + g_k |psi_k|^2) psi_k - J_{k-1,k} psi_{k-1} - J_{k,k+1} psi_{k+1}
void gpe_rhs(std::span<const cplx> psi, const LatticeParameters& params, std::span<cplx> out);
std::vector<cplx> gpe_rhs(std::span<const cplx> psi, const LatticeParameters& params);

// Maps an (intermediate) state to the Hamiltonian parameters in force at that state.
// Invoked at every RK4 stage so state-dependent control stays consistent.
using ParameterProvider = std::function<LatticeParameters(const LatticeWavefunction&)>;

// One classical RK4 step of size dt. Exceptions thrown by the provider propagate.
LatticeWavefunction rk4_step(const LatticeWavefunction& psi, const ParameterProvider& provider,
                             double dt);

}  // namespace ptlattice
