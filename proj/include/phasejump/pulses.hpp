#pragma once

// Measurement-pulse engineering: search for the drive-phase jump that undoes
// the population transferred during a resonant interval, per-pulse scatter
// probability (two independent routes), cumulative measurement statistics,
// the Stark-shift modulation-frequency correction, and the electro-optic
// feasibility bound.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phasejump/bloch.hpp"
#include "phasejump/core.hpp"
#include "phasejump/errors.hpp"

namespace phasejump {

// Half-width of the resonant interval around a detuning minimum: the offset s
// at which the drive has slipped pi out of phase with the atom,
// |integral of delta over [t_res, t_res + s]| = pi.  Beyond it the swept drive
// no longer excites coherently.  Capped at half a period (always-resonant
// drives, nu_off -> 0).
inline double resonant_half_width(const DriveWaveform& waveform) {
    const double t_half = 0.5 * waveform.period();
    const double om = kTwoPi * waveform.nu_mod;
    const auto slip = [&](double s) {
        return kTwoPi * waveform.nu_off * (s - std::sin(om * s) / om);
    };
    if (slip(t_half) <= std::numbers::pi) return t_half;
    double lo = 0.0, hi = t_half;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * t_half; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slip(mid) < std::numbers::pi ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct PulseDesign {
    DriveWaveform base;        // one-cycle waveform, no jump scheduled
    double jump_phase = 0.0;   // radians, in [0, 2pi)
    double jump_time = 0.0;    // delta(t) minimum (resonance instant)
    double residual_p2 = 0.0;  // excited population left at cycle end
    double p_scatter = 0.0;    // per-pulse measurement probability (norm loss)
    double stark_per_cycle = 0.0;  // dynamical coherence-phase gain, signed
    bool degenerate_landscape = false;
    bool multimodal_warning = false;
    // residual_p2(theta) on the search grid, for export and optimality checks
    std::vector<std::pair<double, double>> landscape;

    DriveWaveform waveform_with_jump() const {
        return base.with_jump(jump_time, jump_phase);
    }

    // scheduled measurement window [t_lo, t_hi] around the jump instant
    std::pair<double, double> resonant_window() const {
        const double s = resonant_half_width(base);
        return {jump_time - s, jump_time + s};
    }
};

inline void to_json(nlohmann::json& j, const PulseDesign& d) {
    j = nlohmann::json{{"nu_off", d.base.nu_off},
                       {"nu_mod", d.base.nu_mod},
                       {"omega_r", d.base.omega_r},
                       {"gamma2", d.base.gamma2},
                       {"jump_phase", d.jump_phase},
                       {"jump_time", d.jump_time},
                       {"residual_p2", d.residual_p2},
                       {"p_scatter", d.p_scatter},
                       {"stark_per_cycle", d.stark_per_cycle}};
}

inline void from_json(const nlohmann::json& j, PulseDesign& d) {
    d.base = DriveWaveform{};
    j.at("nu_off").get_to(d.base.nu_off);
    j.at("nu_mod").get_to(d.base.nu_mod);
    j.at("omega_r").get_to(d.base.omega_r);
    j.at("gamma2").get_to(d.base.gamma2);
    j.at("jump_phase").get_to(d.jump_phase);
    j.at("jump_time").get_to(d.jump_time);
    j.at("residual_p2").get_to(d.residual_p2);
    d.p_scatter = j.value("p_scatter", 0.0);
    d.stark_per_cycle = j.value("stark_per_cycle", 0.0);
    d.base.validate();
}

namespace detail {

// Half-cycle decomposition: with the jump applied at t_j = T/2, the final
// excited amplitude is b2(T) = beta + gamma * exp(i theta), with beta/gamma
// from the two half-cycle propagators.  The whole landscape follows from one
// pair of integrations.
struct JumpLandscape {
    complexd beta;
    complexd gamma;

    double residual(double theta) const {
        return std::norm(beta + gamma * std::exp(kI * theta));
    }
    double closed_form_optimum() const {
        return wrap_2pi(std::numbers::pi + std::arg(beta) - std::arg(gamma));
    }
};

inline JumpLandscape jump_landscape(const DriveWaveform& coherent, double tol) {
    const double T = coherent.period();
    const Eigen::Matrix2cd u1 = driven_propagator(coherent, 0.0, T / 2, tol);
    const Eigen::Matrix2cd u2 = driven_propagator(coherent, T / 2, T, tol);
    const Eigen::Vector2cd v = u1 * Eigen::Vector2cd(1.0, 0.0);
    return {u2(1, 0) * v(0), u2(1, 1) * v(1)};
}

}  // namespace detail

// Jump phase minimizing the cycle-end residual excited population, located by
// a 64-point grid over [0, 2pi) followed by golden-section refinement to
// search_tol.  The search runs on the gamma2 = 0 coherent dynamics.
inline PulseDesign find_phase_jump(const DriveWaveform& waveform,
                                   double search_tol = 1e-6,
                                   std::size_t grid_points = 64,
                                   double tol = 1e-10) {
    if (!(search_tol > 0.0 && search_tol < 1.0))
        throw ConfigError("find_phase_jump: search_tol must lie in (0, 1)");
    if (grid_points < 8)
        throw ConfigError("find_phase_jump: need at least 8 grid points");

    PulseDesign design;
    design.base = waveform.without_jumps();
    design.base.n_cycles = 1;
    design.jump_time = design.base.resonance_time(0);

    const DriveWaveform coherent = design.base.with_gamma2(0.0);
    const auto land = detail::jump_landscape(coherent, tol);

    design.landscape.reserve(grid_points);
    std::size_t best = 0;
    double r_min = std::numeric_limits<double>::infinity();
    double r_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double theta = kTwoPi * double(i) / double(grid_points);
        const double r = land.residual(theta);
        design.landscape.emplace_back(theta, r);
        if (r < r_min) {
            r_min = r;
            best = i;
        }
        r_max = std::max(r_max, r);
    }

    if (r_max - r_min <= 1e-15 + 1e-9 * r_max) {
        // nothing to optimize (e.g. omega_r -> 0): every jump works equally
        design.degenerate_landscape = true;
        design.jump_phase = design.landscape[best].first;
        design.residual_p2 = r_min;
        return design;
    }

    // count cyclic local minima; the single-harmonic landscape should have one
    std::size_t n_minima = 0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double prev = design.landscape[(i + grid_points - 1) % grid_points].second;
        const double next = design.landscape[(i + 1) % grid_points].second;
        const double here = design.landscape[i].second;
        if (here < prev && here < next) ++n_minima;
    }
    design.multimodal_warning = n_minima > 1;

    // golden-section refinement inside the bracketing grid interval
    const double step = kTwoPi / double(grid_points);
    double a = design.landscape[best].first - step;
    double b = design.landscape[best].first + step;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = land.residual(x1);
    double f2 = land.residual(x2);
    while (b - a > search_tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = land.residual(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = land.residual(x2);
        }
    }
    design.jump_phase = wrap_2pi(0.5 * (a + b));
    design.residual_p2 = land.residual(design.jump_phase);
    return design;
}

// Closed-form optimum theta* = pi + arg(beta) - arg(gamma); independent
// reference for the search above.
inline double closed_form_jump_phase(const DriveWaveform& waveform,
                                     double tol = 1e-11) {
    return detail::jump_landscape(waveform.without_jumps().with_gamma2(0.0), tol)
        .closed_form_optimum();
}

struct PulseProbability {
    double p = 0.0;           // adopted value (norm-loss route)
    double p_integral = 0.0;  // gamma2 * integral of coherent P2 over a cycle
    double p_norm_loss = 0.0;
    double relative_gap = 0.0;
    bool weak_scatter_warning = false;  // p > 0.1
};

// Per-pulse measurement probability over one modulation cycle with the jump
// applied.  Route one integrates gamma2 * P2(t) along the coherent
// (gamma2 = 0) evolution; route two turns the decay on and takes the norm
// loss.  They agree in the weak-scatter regime.
inline PulseProbability per_pulse_probability(const PulseDesign& design,
                                              double tol = 1e-10) {
    const double gamma = design.base.gamma2;
    if (!(gamma > 0.0))
        throw ConfigError(
            "per_pulse_probability: design needs a physical gamma2 > 0");
    const DriveWaveform with_jump = design.waveform_with_jump();
    const double T = design.base.period();

    // route one: quadrature component along coherent dynamics
    {
        const DriveWaveform coherent = with_jump.with_gamma2(0.0);
        const ode::Options opt = detail::make_options(tol);
        ode::State y(4);
        y << 0.0, 1.0, 0.0, 0.0;
        double t = 0.0;
        const auto rhs = [&coherent](double tt, const ode::State& v,
                                     ode::State& dv) {
            detail::rhs_amplitude_flat(coherent, tt, v, dv);
        };
        PulseProbability out;
        for (const auto& j : coherent.jump_schedule) {
            if (j.time <= 0.0 || j.time >= T) continue;
            auto r = ode::integrate(rhs, t, std::move(y), j.time, opt);
            y = std::move(r.y);
            y[2] *= std::exp(kI * j.theta);
            t = j.time;
        }
        auto r = ode::integrate(rhs, t, std::move(y), T, opt);
        out.p_integral = gamma * r.y[3].real();

        // route two: norm loss with decay on
        PathResult pr =
            integrate_path(AtomState::ground(), with_jump, 0.0, T, tol);
        out.p_norm_loss = 1.0 - pr.final_state.norm2();

        out.p = out.p_norm_loss;
        out.relative_gap = (out.p_norm_loss > 0.0)
                               ? std::abs(out.p_integral - out.p_norm_loss) /
                                     out.p_norm_loss
                               : 0.0;
        out.weak_scatter_warning = out.p > 0.1;
        return out;
    }
}

struct MeasurementBudget {
    double p = 0.0;
    double expected_pulses = 0.0;  // 1/p
    long long n_for_target = 0;    // ceil(ln(1-target)/ln(1-p))
    double target = 0.0;

    // P(at least one measurement within n pulses)
    double cumulative_probability(double n) const {
        return -std::expm1(double(n) * std::log1p(-p));
    }
};

inline MeasurementBudget pulses_for_measurement(double p, double target = 0.99) {
    if (!(p > 0.0 && p < 1.0))
        throw ConfigError("pulses_for_measurement: p must lie in (0, 1)");
    if (!(target > 0.0 && target < 1.0))
        throw ConfigError("pulses_for_measurement: target must lie in (0, 1)");
    MeasurementBudget b;
    b.p = p;
    b.target = target;
    b.expected_pulses = 1.0 / p;
    b.n_for_target =
        (long long)(std::ceil(std::log1p(-target) / std::log1p(-p)));
    return b;
}

struct CorrectedModulation {
    double nu_mod_prime = 0.0;
    double fractional_change = 0.0;  // (nu_mod - nu_mod') / nu_mod
    double periods_per_cycle = 0.0;  // nu10 / nu_mod, diagnostic
};

// Modulation frequency matched to the Stark-shifted two-state evolution:
// nu_mod' = nu_mod / (1 + s / 2pi), under the convention that the Stark shift
// adds s radians to the |0>-|1> coherence phase per cycle.
inline CorrectedModulation corrected_modulation(const DriveWaveform& waveform,
                                                double stark_per_cycle,
                                                double nu10) {
    if (!(std::abs(stark_per_cycle) < std::numbers::pi))
        throw ConfigError("corrected_modulation: |stark_per_cycle| must be < pi");
    CorrectedModulation c;
    c.nu_mod_prime = waveform.nu_mod / (1.0 + stark_per_cycle / kTwoPi);
    c.fractional_change = stark_per_cycle / (kTwoPi + stark_per_cycle);
    c.periods_per_cycle = (waveform.nu_mod > 0.0) ? nu10 / waveform.nu_mod : 0.0;
    return c;
}

struct EomFeasibility {
    double fraction = 0.0;  // share of a two-state period spent jumping
    bool feasible = false;
    double max_fraction = 0.05;
};

// How much of a two-state phase period the electro-optic phase jump consumes;
// infeasible when the jump spans more than max_fraction of tau_phi.
inline EomFeasibility eom_feasibility(double nu10_hz,
                                      double jump_duration_s = 1e-9,
                                      double max_fraction = 0.05) {
    if (!(jump_duration_s > 0.0))
        throw ConfigError("eom_feasibility: jump_duration must be > 0");
    if (!(nu10_hz >= 0.0))
        throw ConfigError("eom_feasibility: nu10 must be >= 0");
    EomFeasibility f;
    f.max_fraction = max_fraction;
    f.fraction = nu10_hz * jump_duration_s;
    f.feasible = f.fraction <= max_fraction;
    return f;
}

// Fill in the decay- and Stark-dependent fields of a searched design.
inline PulseDesign complete_design(PulseDesign design, double tol = 1e-10) {
    if (design.base.gamma2 > 0.0)
        design.p_scatter = per_pulse_probability(design, tol).p;
    const DriveWaveform jump_cycle =
        design.base.with_gamma2(0.0).with_jump(design.jump_time,
                                               design.jump_phase);
    design.stark_per_cycle = stark_phase_of(jump_cycle, 1, tol);
    return design;
}

}  // namespace phasejump
