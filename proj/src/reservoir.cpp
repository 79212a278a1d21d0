#include "ptlattice/reservoir.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "ptlattice/errors.hpp"

namespace ptlattice {

namespace {

void require_embedding(std::size_t sites, std::size_t m) {
    if (m < 1 || m + 2 >= sites)
        throw std::invalid_argument("embedded wells need a neighbour on each side (m=" +
                                    std::to_string(m) + ", sites=" + std::to_string(sites) + ")");
}

}  // namespace

std::vector<double> level_out(double E_left, double E_right, std::size_t sites, std::size_t m) {
    require_embedding(sites, m);
    std::vector<double> E(sites, 0.0);
    for (std::size_t k = 0; k < m; ++k) E[k] = E_left;
    for (std::size_t k = m + 2; k < sites; ++k) E[k] = E_right;
    return E;
}

StarkLattice stark_extension(double E_left, double E_right, std::size_t m, std::size_t sites) {
    require_embedding(sites, m);
    StarkLattice s{(E_right - E_left) / 3.0, 0.5 * (E_left + E_right), std::vector<double>(sites, 0.0)};
    const double centre = static_cast<double>(m) + 0.5;
    for (std::size_t k = 0; k < sites; ++k) {
        if (k == m || k == m + 1) continue;
        s.E[k] = (static_cast<double>(k) - centre) * s.slope + s.offset;
    }
    // anchors are exact
    s.E[m - 1] = E_left;
    s.E[m + 2] = E_right;
    return s;
}

void specific_current_energies(std::span<const cplx> psi, const LatticeParameters& params,
                               std::span<const double> target_rates, std::size_t m,
                               std::vector<double>& E) {
    const std::size_t n = psi.size();
    require_embedding(n, m);
    if (target_rates.size() + 1 != n) throw std::invalid_argument("target rates must be given per link");

    auto link_terms = [&](std::size_t k) {
        const auto kk = static_cast<std::ptrdiff_t>(k);
        const double C = correlation(psi, kk, kk + 1);
        const double J = params.J[k];
        if (C == 0.0 || J == 0.0)
            throw ControlBreakdown("reservoir link " + std::to_string(k) + "-" + std::to_string(k + 1) +
                                   " has vanishing correlation or tunneling");
        // E_k - E_{k+1} + g_k n_k - g_{k+1} n_{k+1} required for the prescribed rate
        return target_rates[k] / (J * C) + zeta_eta(psi, params, k, k + 1).zeta / C;
    };

    for (std::size_t k = m - 1; k-- > 0;) {
        E[k] = link_terms(k) + E[k + 1] - params.g[k] * std::norm(psi[k]) +
               params.g[k + 1] * std::norm(psi[k + 1]);
    }
    for (std::size_t k = m + 2; k + 1 < n; ++k) {
        E[k + 1] = -link_terms(k) + E[k] + params.g[k] * std::norm(psi[k]) -
                   params.g[k + 1] * std::norm(psi[k + 1]);
    }
}

CurrentWeights proportional_weights(std::span<const double> n0, std::size_t m) {
    const std::size_t n = n0.size();
    require_embedding(n, m);
    const double left_total = std::accumulate(n0.begin(), n0.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
    const double right_total = std::accumulate(n0.begin() + static_cast<std::ptrdiff_t>(m + 2), n0.end(), 0.0);
    if (!(left_total > 0.0)) throw std::invalid_argument("left reservoir has no population");
    if (!(right_total > 0.0)) throw std::invalid_argument("right reservoir has no population");

    CurrentWeights w;
    double cumulative = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        cumulative += n0[k];
        w.left.push_back(cumulative / left_total);
    }
    for (std::size_t k = m + 2; k + 1 < n; ++k) {
        const double beyond =
            std::accumulate(n0.begin() + static_cast<std::ptrdiff_t>(k + 1), n0.end(), 0.0);
        w.right.push_back(beyond / right_total);
    }
    return w;
}

void validate_weights(const CurrentWeights& w, std::size_t sites, std::size_t m) {
    require_embedding(sites, m);
    const std::size_t left_links = m - 1;
    const std::size_t right_links = sites - m - 3;
    if (w.left.size() != left_links || w.right.size() != right_links)
        throw std::invalid_argument("expected " + std::to_string(left_links) + " left and " +
                                    std::to_string(right_links) + " right current weights, got " +
                                    std::to_string(w.left.size()) + " and " +
                                    std::to_string(w.right.size()));
}

std::vector<double> target_currents(const CurrentWeights& w, std::span<const cplx> psi, double gamma,
                                    std::size_t m) {
    const std::size_t n = psi.size();
    validate_weights(w, n, m);
    std::vector<double> j(n - 1, 0.0);
    const double left = 2.0 * gamma * std::norm(psi[m]);
    const double right = 2.0 * gamma * std::norm(psi[m + 1]);
    for (std::size_t k = 0; k < w.left.size(); ++k) j[k] = w.left[k] * left;
    for (std::size_t i = 0; i < w.right.size(); ++i) j[m + 2 + i] = w.right[i] * right;
    return j;
}

std::vector<double> target_current_rates(const CurrentWeights& w, std::span<const cplx> psi,
                                         const LatticeParameters& params, GammaValue gamma,
                                         std::size_t m) {
    const std::size_t n = psi.size();
    validate_weights(w, n, m);
    const double n_m = std::norm(psi[m]);
    const double n_p = std::norm(psi[m + 1]);
    const double j_in = current(psi, params, m - 1);
    const double j_mid = current(psi, params, m);
    const double j_out = current(psi, params, m + 1);
    const double left = 2.0 * gamma.rate * n_m + 2.0 * gamma.value * (j_in - j_mid);
    const double right = 2.0 * gamma.rate * n_p + 2.0 * gamma.value * (j_mid - j_out);

    std::vector<double> rates(n - 1, 0.0);
    for (std::size_t k = 0; k < w.left.size(); ++k) rates[k] = w.left[k] * left;
    for (std::size_t i = 0; i < w.right.size(); ++i) rates[m + 2 + i] = w.right[i] * right;
    return rates;
}

}  // namespace ptlattice
