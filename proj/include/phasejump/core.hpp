#pragma once

// Domain types and timescale bookkeeping: two-state amplitudes, timescale
// parameters, Zeeman/field constants, and the Fourier-limit phase check.
//
// Unit conventions: the dynamical modules work in dimensionless units with
// gamma2 = 1; SI quantities (Hz, s, G) appear only in the feasibility helpers
// below and at the CLI boundary.

#include <cmath>
#include <numbers>

#include "phasejump/errors.hpp"

namespace phasejump {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Reduce an angle to [0, 2pi).
inline double wrap_2pi(double angle) {
    double a = std::fmod(angle, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    // fmod can return exactly 2pi after the correction when angle is a tiny
    // negative number.
    if (a >= kTwoPi) a -= kTwoPi;
    return a;
}

// Reduce an angle to (-pi, pi].
inline double wrap_pi(double angle) {
    const double a = wrap_2pi(angle);
    return (a > std::numbers::pi) ? a - kTwoPi : a;
}

// Superposition a|0> + sqrt(1-a^2) e^{i phi}|1>: real amplitude alpha plus the
// relative phase, stored unwrapped (cumulative radians) so slow phase drifts
// add exactly; use phi_mod() for the circle view.
struct TwoStateAmplitudes {
    double alpha = 1.0;  // in [0,1]; populations alpha^2 and 1-alpha^2
    double phi = 0.0;    // unwrapped radians

    TwoStateAmplitudes() = default;
    TwoStateAmplitudes(double alpha_, double phi_) : alpha(alpha_), phi(phi_) {
        if (!(std::isfinite(alpha) && std::isfinite(phi)))
            throw ConfigError("TwoStateAmplitudes: non-finite input");
        if (alpha < 0.0 || alpha > 1.0)
            throw ConfigError("TwoStateAmplitudes: alpha must lie in [0,1]");
    }

    double p0() const { return alpha * alpha; }
    double p1() const { return 1.0 - alpha * alpha; }
    double phi_mod() const { return wrap_2pi(phi); }

    // Free evolution: phi advances at 2*pi*nu10.
    TwoStateAmplitudes evolved(double nu10, double dt) const {
        TwoStateAmplitudes s = *this;
        s.phi += kTwoPi * nu10 * dt;
        return s;
    }
};

// Characteristic timescales of the measurement chain.
struct TimescaleParams {
    double nu10 = 1.0;     // two-state splitting frequency
    double tau_m = 1.0;    // mean measurement (first-scatter) time
    double tau_c = 1e-6;   // reservoir correlation time
    double gamma1 = 1.0;   // |1> damping rate of the abstract two-level model

    double tau_phi() const { return 1.0 / nu10; }  // phase period, exactly
};

struct PhysicalConstants {
    // Bohr magneton over Planck constant, Hz per gauss.
    double bohr_magneton_over_h = 1.399624e6;
    double lande_g = 0.5;
    double b_field = 0.0;  // gauss
};

struct PhaseAccumulation {
    double radians = 0.0;
    bool fourier_limited = false;  // true iff delta_nu * delta_t >= 1
};

// Phase accumulated between two frequency components over a duration,
// 2*pi*delta_nu*delta_t; resolving them requires at least 2*pi.
inline PhaseAccumulation accumulated_phase(double delta_nu, double delta_t) {
    if (!(std::isfinite(delta_nu) && std::isfinite(delta_t)))
        throw ConfigError("accumulated_phase: non-finite input");
    if (delta_nu <= 0.0)
        throw ConfigError("accumulated_phase: delta_nu must be positive");
    if (delta_t < 0.0)
        throw ConfigError("accumulated_phase: delta_t must be nonnegative");
    PhaseAccumulation out;
    out.radians = kTwoPi * delta_nu * delta_t;
    // 1e-12 relative slack so delta_t = 1/delta_nu counts as limited despite
    // the division roundoff.
    out.fourier_limited = delta_nu * delta_t >= 1.0 - 1e-12;
    return out;
}

// Zeeman splitting between adjacent sublevels, g * (muB/h) * B.
inline double zeeman_splitting(const PhysicalConstants& constants) {
    if (!(std::isfinite(constants.b_field)))
        throw ConfigError("zeeman_splitting: non-finite field");
    if (constants.b_field < 0.0)
        throw ConfigError("zeeman_splitting: negative field");
    return constants.lande_g * constants.bohr_magneton_over_h * constants.b_field;
}

struct TimescaleVerdict {
    double ratio_c_over_m = 0.0;     // tau_c / tau_m
    double ratio_m_over_phi = 0.0;   // tau_m / tau_phi
    bool markov_ok = false;          // tau_c << tau_m
    bool phase_specific_ok = false;  // tau_m << tau_phi
    double threshold = 0.01;         // "much less than" cutoff on the ratios
};

// Orders the three timescales: Markov validity (tau_c << tau_m) and whether a
// phase-specific measurement is possible at all (tau_m << tau_phi).
inline TimescaleVerdict timescale_verdict(const TimescaleParams& params,
                                          double threshold = 0.01) {
    if (!(params.nu10 > 0.0 && params.tau_m > 0.0 && params.tau_c > 0.0))
        throw ConfigError("timescale_verdict: times and rates must be positive");
    if (!(threshold > 0.0))
        throw ConfigError("timescale_verdict: threshold must be positive");
    TimescaleVerdict v;
    v.threshold = threshold;
    v.ratio_c_over_m = params.tau_c / params.tau_m;
    v.ratio_m_over_phi = params.tau_m / params.tau_phi();
    v.markov_ok = v.ratio_c_over_m <= threshold;
    v.phase_specific_ok = v.ratio_m_over_phi <= threshold;
    return v;
}

}  // namespace phasejump
