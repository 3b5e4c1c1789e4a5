#pragma once

// State discrimination by selection rules: sigma+ light on an F' = F manifold
// drives only |0>, so fluorescence versus silence reads out the state without
// a closed transition.  Each scatter pumps the atom to the dark state with
// probability q_dark, giving a geometric photon budget (mean 1/q); the first
// scatter happens after ~tau_m, so the phase is sampled sharply when
// tau_m << tau_phi.  Modeled at the event level: exponential waiting times
// and per-scatter branching, no multi-level coherent dynamics.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phasejump/core.hpp"
#include "phasejump/errors.hpp"
#include "phasejump/hvmodels.hpp"
#include "phasejump/pulses.hpp"
#include "phasejump/rng.hpp"
#include "phasejump/trajectories.hpp"

namespace phasejump {

struct SelectionScheme {
    double q_dark = 0.5;   // per-scatter dark-state branching, (0, 1]
    double gamma2 = 1.0;   // excited-state decay rate
    double nu10 = 0.0;     // |0>-|1> splitting (phase clock), 1/tau_phi
    double tau_m = 1.0;    // mean scatter (measurement) time

    void validate() const {
        if (!(q_dark > 0.0 && q_dark <= 1.0))
            throw ConfigError("SelectionScheme: q_dark must lie in (0, 1]");
        if (!(gamma2 > 0.0))
            throw ConfigError("SelectionScheme: gamma2 must be > 0");
        if (!(nu10 >= 0.0)) throw ConfigError("SelectionScheme: nu10 must be >= 0");
        if (!(tau_m > 0.0)) throw ConfigError("SelectionScheme: tau_m must be > 0");
    }

    double tau_phi() const {
        return nu10 > 0.0 ? 1.0 / nu10
                          : std::numeric_limits<double>::infinity();
    }
    // the run is declared dark when no photon arrived for this long
    double certified_dark_time() const { return 10.0 * tau_m; }
};

// Photon count from a bright-state start: P(n) = q (1-q)^(n-1), n >= 1 (the
// n-th scatter is the one that lands in the dark state).
struct PhotonCountDistribution {
    double q = 0.5;

    explicit PhotonCountDistribution(double q_dark) : q(q_dark) {
        if (!(q > 0.0 && q <= 1.0))
            throw ConfigError("PhotonCountDistribution: q must lie in (0, 1]");
    }

    double pmf(std::uint64_t n) const {
        if (n == 0) return 0.0;
        return q * std::pow(1.0 - q, double(n - 1));
    }
    double cdf(std::uint64_t n) const {
        if (n == 0) return 0.0;
        return -std::expm1(double(n) * std::log1p(-q));
    }
    double mean() const { return 1.0 / q; }
    double variance() const { return (1.0 - q) / (q * q); }

    std::uint64_t sample(Rng& rng) const {
        if (q == 1.0) return 1;
        const double u = rng.uniform();
        return 1 + std::uint64_t(std::log1p(-u) / std::log1p(-q));
    }
};

inline PhotonCountDistribution photon_count_distribution(
    const SelectionScheme& scheme) {
    scheme.validate();
    return PhotonCountDistribution(scheme.q_dark);
}

// One discrimination run.  The branch outcome is drawn from the measurement
// model at the phase of the first-scatter instant (waiting ~ Exp(tau_m)).
// Outcome |0>: that scatter and the following geometric tail are recorded and
// the atom ends pumped dark.  Outcome |1>: no photons ever; the run ends at
// the certified-dark timeout.
inline TrajectoryRecord discrimination_outcome(
    const TwoStateAmplitudes& s0, const SelectionScheme& scheme, Rng& rng,
    const MeasurementModel& model = MeasurementModel::born()) {
    scheme.validate();
    TrajectoryRecord rec;
    rec.mode = "selection";
    rec.alpha = s0.alpha;
    rec.phi0 = s0.phi;

    const double t_first = rng.exponential(scheme.tau_m);
    const double phi_star =
        wrap_2pi(s0.phi + kTwoPi * scheme.nu10 * t_first);
    rec.phase_tag = phi_star;
    // in this scheme |0> is the bright state: P0 is the scatter branch
    if (rng.uniform() >= model.p0(s0.alpha, phi_star).p0) {
        rec.terminal = "dark-1";
        return rec;  // silent for 10 tau_m, certified dark
    }
    double t = t_first;
    rec.jump_times.push_back(t);
    rec.phase_at_jump.push_back(phi_star);
    while (rng.uniform() >= scheme.q_dark) {
        t += rng.exponential(scheme.tau_m);
        rec.jump_times.push_back(t);
        rec.phase_at_jump.push_back(
            wrap_2pi(s0.phi + kTwoPi * scheme.nu10 * t));
    }
    rec.n_photons = rec.jump_times.size();
    rec.terminal = "pumped-dark";
    return rec;
}

inline std::vector<TrajectoryRecord> selection_ensemble(
    const TwoStateAmplitudes& s0, const SelectionScheme& scheme,
    const MeasurementModel& model, std::size_t n, std::uint64_t seed,
    unsigned threads = 1) {
    if (n == 0) throw ConfigError("selection_ensemble: n must be > 0");
    return detail::indexed_ensemble(n, threads, [&](std::size_t i) {
        Rng rng(seed, i);
        TrajectoryRecord rec = discrimination_outcome(s0, scheme, rng, model);
        rec.seed = seed;
        rec.stream = i;
        return rec;
    });
}

// Side-by-side summary of the two measurement schemes.  Each side is reported
// in its own unit system (the pulsed design in 1/gamma2 units, the selection
// scheme in lab units); tau_phi is shared through nu10.
struct SchemeComparison {
    // selection scheme
    double selection_photons_mean = 0.0;
    double selection_photons_variance = 0.0;
    double selection_phase_spread = 0.0;    // rad at first scatter
    double selection_r_estimate = 0.0;      // 1/sqrt(1 + spread^2), Exp waiting
    double selection_measure_time = 0.0;    // mean bright-branch duration
    double certified_dark_time = 0.0;
    // pulsed design
    double pulsed_p_scatter = 0.0;
    double pulsed_expected_pulses = 0.0;
    double pulsed_measure_time = 0.0;       // expected_pulses * period
    double pulsed_phase_spread = 0.0;       // rad across the resonant window
    bool pulsed_closed_transition = true;   // photon budget not limited
    // shared
    double tau_phi = 0.0;
    EomFeasibility eom;
};

inline void to_json(nlohmann::json& j, const SchemeComparison& c) {
    j = nlohmann::json{
        {"selection",
         {{"photons_mean", c.selection_photons_mean},
          {"photons_variance", c.selection_photons_variance},
          {"phase_spread_rad", c.selection_phase_spread},
          {"phase_concentration_R_estimate", c.selection_r_estimate},
          {"measure_time", c.selection_measure_time},
          {"certified_dark_time", c.certified_dark_time}}},
        {"pulsed",
         {{"p_scatter", c.pulsed_p_scatter},
          {"expected_pulses", c.pulsed_expected_pulses},
          {"measure_time", c.pulsed_measure_time},
          {"phase_spread_rad", c.pulsed_phase_spread},
          {"closed_transition", c.pulsed_closed_transition}}},
        {"tau_phi", c.tau_phi},
        {"eom", {{"fraction", c.eom.fraction}, {"feasible", c.eom.feasible}}}};
}

inline SchemeComparison scheme_compare(const PulseDesign& pulsed,
                                       const SelectionScheme& selection) {
    selection.validate();
    if (!(pulsed.p_scatter > 0.0))
        throw ConfigError(
            "scheme_compare: pulsed design needs p_scatter (complete_design)");
    SchemeComparison c;
    const PhotonCountDistribution pc(selection.q_dark);
    c.selection_photons_mean = pc.mean();
    c.selection_photons_variance = pc.variance();
    c.selection_phase_spread =
        kTwoPi * selection.nu10 * selection.tau_m;  // 2 pi tau_m / tau_phi
    c.selection_r_estimate =
        1.0 / std::sqrt(1.0 + c.selection_phase_spread * c.selection_phase_spread);
    c.selection_measure_time = selection.tau_m / selection.q_dark;
    c.certified_dark_time = selection.certified_dark_time();
    c.pulsed_p_scatter = pulsed.p_scatter;
    c.pulsed_expected_pulses = 1.0 / pulsed.p_scatter;
    c.pulsed_measure_time = c.pulsed_expected_pulses * pulsed.base.period();
    // one modulation cycle per Larmor period: window width in phase is its
    // fraction of the cycle
    c.pulsed_phase_spread =
        kTwoPi * resonant_half_width(pulsed.base) / pulsed.base.period();
    c.tau_phi = selection.tau_phi();
    c.eom = eom_feasibility(selection.nu10);
    return c;
}

}  // namespace phasejump
