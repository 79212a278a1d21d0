#include "ptlattice/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ptlattice {

GammaValue gamma(double t, const GammaSchedule& schedule) {
    if (schedule.shape == GammaSchedule::Shape::constant) return {schedule.target, 0.0};
    if (!(schedule.ramp_time > 0.0)) throw std::invalid_argument("ramp time must be positive");
    if (t < 0.0) return {0.0, 0.0};
    if (t > schedule.ramp_time) return {schedule.target, 0.0};
    const double w = std::numbers::pi / schedule.ramp_time;
    return {0.5 * schedule.target * (1.0 - std::cos(w * t)), 0.5 * schedule.target * w * std::sin(w * t)};
}

}  // namespace ptlattice
