#include "ptlattice/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptlattice {

LatticeParameters LatticeParameters::uniform(std::size_t sites, double tunneling,
                                             double interaction) {
    if (sites < 2) throw std::invalid_argument("lattice needs at least two sites");
    return LatticeParameters{std::vector<double>(sites, 0.0),
                             std::vector<double>(sites - 1, tunneling),
                             std::vector<double>(sites, interaction)};
}

void validate(const LatticeParameters& params) {
    const std::size_t n = params.E.size();
    if (n < 2) throw std::invalid_argument("lattice needs at least two sites");
    if (params.J.size() != n - 1)
        throw std::invalid_argument("expected " + std::to_string(n - 1) + " tunneling elements, got " +
                                    std::to_string(params.J.size()));
    if (params.g.size() != n)
        throw std::invalid_argument("expected " + std::to_string(n) + " interaction strengths, got " +
                                    std::to_string(params.g.size()));
}

void validate(const LatticeWavefunction& psi, const LatticeParameters& params) {
    validate(params);
    if (psi.size() != params.sites())
        throw std::invalid_argument("wavefunction has " + std::to_string(psi.size()) +
                                    " amplitudes for a " + std::to_string(params.sites()) +
                                    "-site lattice");
    if (!is_finite(psi.amplitudes)) throw std::invalid_argument("wavefunction is not finite");
}

bool is_finite(std::span<const cplx> psi) {
    for (const cplx& a : psi)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) return false;
    return true;
}

double population(std::span<const cplx> psi, std::size_t k) { return std::norm(psi[k]); }

namespace {

bool on_chain(std::span<const cplx> psi, std::ptrdiff_t k) {
    return k >= 0 && k < static_cast<std::ptrdiff_t>(psi.size());
}

}  // namespace

double modified_current(std::span<const cplx> psi, std::ptrdiff_t k, std::ptrdiff_t l) {
    if (!on_chain(psi, k) || !on_chain(psi, l)) return 0.0;
    // i (z - z^*) = -2 Im z with z = psi_k psi_l^*
    return -2.0 * (psi[static_cast<std::size_t>(k)] * std::conj(psi[static_cast<std::size_t>(l)])).imag();
}

double correlation(std::span<const cplx> psi, std::ptrdiff_t k, std::ptrdiff_t l) {
    if (!on_chain(psi, k) || !on_chain(psi, l)) return 0.0;
    return 2.0 * (psi[static_cast<std::size_t>(k)] * std::conj(psi[static_cast<std::size_t>(l)])).real();
}

double current(std::span<const cplx> psi, const LatticeParameters& params, std::size_t k) {
    const auto kk = static_cast<std::ptrdiff_t>(k);
    return params.tunneling(kk) * modified_current(psi, kk, kk + 1);
}

double total_norm(std::span<const cplx> psi) {
    double sum = 0.0;
    for (const cplx& a : psi) sum += std::norm(a);
    return sum;
}

ObservableSet observables(std::span<const cplx> psi, const LatticeParameters& params,
                          std::span<const SitePair> pairs) {
    ObservableSet out;
    const std::size_t n = psi.size();
    out.n.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.n[k] = population(psi, k);
    out.j.resize(n > 0 ? n - 1 : 0);
    for (std::size_t k = 0; k + 1 < n; ++k) out.j[k] = current(psi, params, k);
    out.pairs.assign(pairs.begin(), pairs.end());
    out.jt.reserve(pairs.size());
    out.C.reserve(pairs.size());
    for (const SitePair& p : pairs) {
        if (p.k >= n || p.l >= n)
            throw std::out_of_range("site pair (" + std::to_string(p.k) + ", " + std::to_string(p.l) +
                                    ") outside " + std::to_string(n) + "-site lattice");
        const auto k = static_cast<std::ptrdiff_t>(p.k);
        const auto l = static_cast<std::ptrdiff_t>(p.l);
        out.jt.push_back(modified_current(psi, k, l));
        out.C.push_back(correlation(psi, k, l));
    }
    return out;
}

ZetaEta zeta_eta(std::span<const cplx> psi, const LatticeParameters& params, std::size_t k,
                 std::size_t l) {
    if (k >= psi.size() || l >= psi.size()) throw std::out_of_range("zeta_eta: site index outside lattice");
    const auto a = static_cast<std::ptrdiff_t>(k);
    const auto b = static_cast<std::ptrdiff_t>(l);
    const double Jkm = params.tunneling(a - 1);
    const double Jkp = params.tunneling(a);
    const double Jlm = params.tunneling(b - 1);
    const double Jlp = params.tunneling(b);
    ZetaEta r{};
    r.zeta = Jkm * correlation(psi, a - 1, b) + Jkp * correlation(psi, a + 1, b) -
             Jlm * correlation(psi, a, b - 1) - Jlp * correlation(psi, a, b + 1);
    r.eta = Jkm * modified_current(psi, a - 1, b) + Jkp * modified_current(psi, a + 1, b) -
            Jlm * modified_current(psi, a, b - 1) - Jlp * modified_current(psi, a, b + 1);
    return r;
}

void gpe_rhs(std::span<const cplx> psi, const LatticeParameters& params, std::span<cplx> out) {
    const std::size_t n = psi.size();
    for (std::size_t k = 0; k < n; ++k) {
        cplx h = (params.E[k] + params.g[k] * std::norm(psi[k])) * psi[k];
        if (k > 0) h -= params.J[k - 1] * psi[k - 1];
        if (k + 1 < n) h -= params.J[k] * psi[k + 1];
        out[k] = cplx(h.imag(), -h.real());  // -i h
    }
}

std::vector<cplx> gpe_rhs(std::span<const cplx> psi, const LatticeParameters& params) {
    std::vector<cplx> out(psi.size());
    gpe_rhs(psi, params, out);
    return out;
}

LatticeWavefunction rk4_step(const LatticeWavefunction& psi, const ParameterProvider& provider,
                             double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    const std::size_t n = psi.size();
    std::vector<cplx> k1(n), k2(n), k3(n), k4(n);
    LatticeWavefunction stage{psi.amplitudes, psi.time};

    gpe_rhs(psi.amplitudes, provider(stage), k1);

    stage.time = psi.time + 0.5 * dt;
    for (std::size_t k = 0; k < n; ++k) stage[k] = psi[k] + 0.5 * dt * k1[k];
    gpe_rhs(stage.amplitudes, provider(stage), k2);

    for (std::size_t k = 0; k < n; ++k) stage[k] = psi[k] + 0.5 * dt * k2[k];
    gpe_rhs(stage.amplitudes, provider(stage), k3);

    stage.time = psi.time + dt;
    for (std::size_t k = 0; k < n; ++k) stage[k] = psi[k] + dt * k3[k];
    gpe_rhs(stage.amplitudes, provider(stage), k4);

    LatticeWavefunction next{std::vector<cplx>(n), psi.time + dt};
    for (std::size_t k = 0; k < n; ++k)
        next[k] = psi[k] + (dt / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    return next;
}

}  // namespace ptlattice
