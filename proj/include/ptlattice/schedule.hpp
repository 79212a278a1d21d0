#pragma once

namespace ptlattice {

// Gain/loss rate Gamma(t) and its analytic derivative.
struct GammaSchedule {
    enum class Shape { constant, adiabatic_ramp };

    Shape shape = Shape::constant;
    double target = 0.0;     // Gamma for t >= ramp_time (or always, when constant)
    double ramp_time = 0.0;  // t_tar, must be > 0 for the ramp

    static GammaSchedule constant(double gamma) { return {Shape::constant, gamma, 0.0}; }
    static GammaSchedule ramp(double target, double ramp_time) {
        return {Shape::adiabatic_ramp, target, ramp_time};
    }
};

struct GammaValue {
    double value;
    double rate;  // dGamma/dt
};

// Ramp: 0 for t < 0, target [1 - cos(pi t / t_tar)] / 2 on [0, t_tar], target afterwards.
// Throws std::invalid_argument for a ramp with t_tar <= 0.
GammaValue gamma(double t, const GammaSchedule& schedule);

}  // namespace ptlattice
