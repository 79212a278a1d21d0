#pragma once

#include <stdexcept>
#include <string>

namespace ptlattice {

// The control equations cannot be solved any more (vanishing determinant,
// vanishing correlation in a denominator, diverging control elements).
class ControlBreakdown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Gauge function denominators C_{m,m+2} or C_{m-1,m+1} vanish.
class SingularGauge : public ControlBreakdown {
public:
    using ControlBreakdown::ControlBreakdown;
};

// Requested initial currents cannot be produced by any choice of phases.
class InfeasibleInitialization : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ptlattice
