#pragma once

// Closed-loop control that makes wells m, m+1 of a Hermitian chain follow the
// PT-symmetric two-mode dynamics exactly.
//
// Controlled elements:  J_{m-1,m} = d C_{m,m+2},  J_{m+1,m+2} = d C_{m-1,m+1},
// and E_{m-1}, E_{m+2} from a 2x2 linear system that keeps
//   J_{m-1,m} jt_{m-1,m} = 2 Gamma n_m,   J_{m+1,m+2} jt_{m+1,m+2} = 2 Gamma n_{m+1}
// stationary in time. m is the 0-based index of the first embedded well.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ptlattice/lattice.hpp"
#include "ptlattice/reservoir.hpp"
#include "ptlattice/schedule.hpp"

namespace ptlattice {

inline constexpr double kDeterminantTolerance = 1e-12;

// Choice of the free gauge function d(t).
struct DStrategy {
    enum class Kind { constant, compensating };

    Kind kind = Kind::constant;
    double d0 = 1.0;        // constant kind
    double j_left0 = 1.0;   // compensating kind: J_{m-1,m} to hold on average
    double j_right0 = 1.0;  // compensating kind: J_{m+1,m+2} to hold on average

    // Throws std::invalid_argument for d0 == 0.
    static DStrategy constant(double d0);
    static DStrategy compensating(double j_left0, double j_right0);
};

// hbar d'(t) = Dm1 E_{m-1} + Dp2 E_{m+2} + D
struct GaugeValue {
    double d;
    double Dm1;
    double Dp2;
    double D;
};

// params supplies the uncontrolled tunnelings and g; its J_{m-1,m} and J_{m+1,m+2}
// entries are ignored. Throws SingularGauge when a compensating denominator vanishes.
GaugeValue gauge_value(std::span<const cplx> psi, const LatticeParameters& params,
                       const DStrategy& strategy, std::size_t m);

struct ControlledTunnelings {
    double left;   // J_{m-1,m}
    double right;  // J_{m+1,m+2}
};

ControlledTunnelings controlled_tunnelings(std::span<const cplx> psi, double d, std::size_t m);

// How the population rates of the embedded wells enter the right-hand side.
//   measured    : dn_m/dt = j_{m-1,m} - j_{m,m+1} from the current state
//   substituted : j_{m-1,m} -> 2 Gamma n_m, j_{m+1,m+2} -> 2 Gamma n_{m+1} already inserted
// Both agree while the conditions hold. Under `substituted` the residual of the
// right condition obeys dr2/dt = +2 Gamma r2 and grows exponentially from round-off.
enum class PopulationRate { measured, substituted };

struct EnergySystem {
    std::array<std::array<double, 2>, 2> M;
    std::array<double, 2> v;

    double determinant() const { return M[0][0] * M[1][1] - M[0][1] * M[1][0]; }
    // Product of the row norms; |det| / scale is the sine of the angle between the rows.
    double scale() const;
};

// params must already carry the controlled tunnelings. Tunnelings beyond the chain
// (J_{m-2,m-1}, J_{m+2,m+3} in a four-well system) count as zero.
EnergySystem assemble_energy_system(std::span<const cplx> psi, const LatticeParameters& params,
                                    const GaugeValue& gauge, GammaValue gamma, std::size_t m,
                                    PopulationRate rate = PopulationRate::measured);

struct EnergyPair {
    double left;   // E_{m-1}
    double right;  // E_{m+2}
};

// Cramer's rule. Throws ControlBreakdown if |det M| <= eps * scale.
EnergyPair solve_energies(const EnergySystem& system, double eps = kDeterminantTolerance);

enum class Branch { plus, minus };

struct AnalyticDeterminant {
    double det;
    double alpha;
    double beta;
    double gamma;
    double radicand;  // (1 - alpha)^2 - beta^2
    bool valid;       // false when the radicand is negative
};

// Closed-form det M valid while the conditions hold.
//   constant d     : +-16 d^2 n_{m-1} n_m n_{m+1} n_{m+2} sqrt((1-alpha)^2 - beta^2)
//   compensating d : 8 n_{m-1} n_m n_{m+1} n_{m+2} d^2 (+-sqrt(...) + gamma^2 - 1)
AnalyticDeterminant analytic_determinant(std::span<const cplx> psi, double d, double gamma,
                                         DStrategy::Kind kind, std::size_t m, Branch branch);

struct ConditionResiduals {
    double r1;  // hbar j_{m-1,m} - 2 Gamma n_m
    double r2;  // hbar j_{m+1,m+2} - 2 Gamma n_{m+1}
    double r3;  // J_{m-1,m} C_{m-1,m+1} - J_{m+1,m+2} C_{m,m+2}
    double r4;  // J_{m-1,m} jt_{m-1,m+1} - J_{m+1,m+2} jt_{m,m+2}
};

ConditionResiduals condition_residuals(std::span<const cplx> psi, const LatticeParameters& params,
                                       double gamma, std::size_t m);

// Adjusts the phases of `seed` so that the conditions hold at Gamma = gamma0 and, when
// `targets` is given, the reservoir currents match their targets. Populations and the
// phases of the embedded wells are kept. Among the admissible phase differences the one
// closest to the seed is used.
// Throws InfeasibleInitialization when a required current is out of reach.
LatticeWavefunction initialize_state(const LatticeWavefunction& seed, double gamma0,
                                     const LatticeParameters& params, std::size_t m,
                                     const DStrategy& strategy,
                                     const CurrentWeights* targets = nullptr);

struct ControlState {
    double d = 0.0;
    double Dm1 = 0.0;
    double Dp2 = 0.0;
    double D = 0.0;
    double J_left = 0.0;
    double J_right = 0.0;
    double E_left = 0.0;
    double E_right = 0.0;
    double det_numeric = 0.0;
    double det_scale = 0.0;
    double det_analytic = 0.0;  // NaN until a branch is selected or outside validity
    std::optional<Branch> sign;
};

// Stateless apart from the determinant branch, which is chosen at t = 0 and followed by
// continuity (see set_branch).
class EmbeddingController {
public:
    EmbeddingController(std::size_t m, DStrategy strategy, GammaSchedule schedule,
                        PopulationRate rate = PopulationRate::measured);

    // Writes J_{m-1,m}, J_{m+1,m+2}, E_{m-1}, E_{m+2} into params and zeroes E_m, E_{m+1}.
    // Throws ControlBreakdown when the energy system is singular.
    ControlState apply(double t, std::span<const cplx> psi, LatticeParameters& params) const;

    // Picks the determinant branch that matches the numeric determinant at this state.
    void select_branch(double t, std::span<const cplx> psi, const LatticeParameters& params);
    // Switches branch where the radicand touches zero and the trajectory passes onto the other sign.
    void set_branch(Branch b) { branch_ = b; }

    std::size_t m() const { return m_; }
    const DStrategy& strategy() const { return strategy_; }
    const GammaSchedule& schedule() const { return schedule_; }
    std::optional<Branch> branch() const { return branch_; }

private:
    std::size_t m_;
    DStrategy strategy_;
    GammaSchedule schedule_;
    PopulationRate rate_;
    std::optional<Branch> branch_;
};

}  // namespace ptlattice
