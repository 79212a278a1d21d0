#pragma once

// Onsite energies of the reservoir wells, i.e. every well except m-1 .. m+2.
// Site indices are 0-based; m is the first embedded well.

#include <span>
#include <vector>

#include "ptlattice/lattice.hpp"
#include "ptlattice/schedule.hpp"

namespace ptlattice {

// Target reservoir currents as multiples of the controlled currents:
//   left[k]  : j_{k,k+1}     = left[k]  * j_{m-1,m}    for links k = 0 .. m-2
//   right[i] : j_{k,k+1}     = right[i] * j_{m+1,m+2}  for links k = m+2+i .. N-2
struct CurrentWeights {
    std::vector<double> left;
    std::vector<double> right;
};

struct ReservoirStrategy {
    enum class Kind { level_out, specific_currents, proportional_currents, stark_lattice };

    Kind kind = Kind::level_out;
    CurrentWeights weights;  // used by the two current-driven kinds

    bool drives_currents() const {
        return kind == Kind::specific_currents || kind == Kind::proportional_currents;
    }
};

// E_k = E_left for k < m-1, E_right for k > m+2, zero on the embedded wells.
std::vector<double> level_out(double E_left, double E_right, std::size_t sites, std::size_t m);

struct StarkLattice {
    double slope;   // Delta E
    double offset;  // E^(0)
    std::vector<double> E;
};

// Linear tilt through the anchors E_{m-1}, E_{m+2}, centred between the embedded wells,
// which stay at zero energy.
StarkLattice stark_extension(double E_left, double E_right, std::size_t m, std::size_t sites);

// Fills the reservoir energies so that every reservoir current changes at the prescribed
// rate. E[m-1] and E[m+2] must already hold the solved control energies. target_rates is
// indexed by link (size N-1); entries outside the reservoir links are ignored.
// Throws ControlBreakdown when C_{k,k+1} or J_{k,k+1} vanishes on a link in use.
void specific_current_energies(std::span<const cplx> psi, const LatticeParameters& params,
                               std::span<const double> target_rates, std::size_t m,
                               std::vector<double>& E);

// Weights that make every reservoir well drain (fill) at a rate proportional to its
// initial population. Throws std::invalid_argument when a reservoir side is empty.
CurrentWeights proportional_weights(std::span<const double> initial_populations, std::size_t m);

// Checks sizes against the lattice; throws std::invalid_argument.
void validate_weights(const CurrentWeights& w, std::size_t sites, std::size_t m);

// Target currents j^tar_{k,k+1}, indexed by link. The controlled currents are taken as
// 2 Gamma n_m and 2 Gamma n_{m+1}.
std::vector<double> target_currents(const CurrentWeights& w, std::span<const cplx> psi,
                                    double gamma, std::size_t m);

// d j^tar / dt along the trajectory, from the analytic Gamma rate and the instantaneous
// population rates of the embedded wells. params must carry the controlled tunnelings.
std::vector<double> target_current_rates(const CurrentWeights& w, std::span<const cplx> psi,
                                         const LatticeParameters& params, GammaValue gamma,
                                         std::size_t m);

}  // namespace ptlattice
