#pragma once

// Quantum-jump Monte Carlo for the measurement pulse train.  A trajectory
// follows one atom prepared in alpha|0> + sqrt(1-alpha^2)|1> through repeated
// (or continuous) detection: the |1> component scatters with waiting law set
// by the no-jump norm decay, and the branch outcome is drawn from a
// measurement model (Born or phase-dependent), tagged with the accumulated
// superposition phase at the decisive instant.
//
// Random-draw order per trajectory (fixed, for bitwise reproducibility):
//   u_t  candidate decisive-event time (no-jump norm target)
//   u_b  branch outcome, drawn only when a candidate exists
//   u_r  one per subsequent re-excitation on the bright branch, in time order

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "phasejump/bloch.hpp"
#include "phasejump/core.hpp"
#include "phasejump/errors.hpp"
#include "phasejump/hvmodels.hpp"
#include "phasejump/pulses.hpp"
#include "phasejump/rng.hpp"
#include "phasejump/stats.hpp"

namespace phasejump {

enum class TrajectoryMode { Abstract, Continuous, Pulsed };

// Phase reference while amplitude occupies |2>: the default tracks arg(c1) of
// the no-jump evolution; FoldC2 projects the excited amplitude back onto |1>
// (adding c2 in the non-rotating frame) before taking the argument.
enum class PhaseReference { C1Branch, FoldC2 };

inline const char* to_string(TrajectoryMode m) {
    switch (m) {
        case TrajectoryMode::Abstract: return "abstract";
        case TrajectoryMode::Continuous: return "continuous";
        case TrajectoryMode::Pulsed: return "pulsed";
    }
    return "?";
}

// Terminal labels: "measured-1" (detection fired; atom found in |1>),
// "dark-0" (branch outcome |0>, never scatters).  Selection-scheme runs add
// "pumped-dark" and "dark-1".
struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string mode;
    double alpha = 0.0;
    double phi0 = 0.0;
    std::vector<double> jump_times;
    std::vector<double> phase_at_jump;  // tracker phase, [0, 2pi)
    double phase_tag = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t n_photons = 0;
    std::string terminal;
    bool censored = false;  // horizon ended before the candidate event
};

inline void to_json(nlohmann::json& j, const TrajectoryRecord& r) {
    j = nlohmann::json{{"seed", r.seed},
                       {"stream", r.stream},
                       {"mode", r.mode},
                       {"alpha", r.alpha},
                       {"phi0", r.phi0},
                       {"jump_times", r.jump_times},
                       {"phase_at_jump", r.phase_at_jump},
                       {"n_photons", r.n_photons},
                       {"terminal", r.terminal},
                       {"censored", r.censored}};
    if (std::isfinite(r.phase_tag))
        j["phase_tag"] = r.phase_tag;
    else
        j["phase_tag"] = nullptr;
}

inline void from_json(const nlohmann::json& j, TrajectoryRecord& r) {
    j.at("seed").get_to(r.seed);
    j.at("stream").get_to(r.stream);
    j.at("mode").get_to(r.mode);
    j.at("alpha").get_to(r.alpha);
    j.at("phi0").get_to(r.phi0);
    j.at("jump_times").get_to(r.jump_times);
    j.at("phase_at_jump").get_to(r.phase_at_jump);
    j.at("n_photons").get_to(r.n_photons);
    j.at("terminal").get_to(r.terminal);
    r.censored = j.value("censored", false);
    const auto& tag = j.at("phase_tag");
    r.phase_tag = tag.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                : tag.get<double>();
}

namespace detail {

// records[i] = fn(i), optionally threaded; the result is independent of the
// thread count because every index owns its own RNG stream
template <class Fn>
std::vector<TrajectoryRecord> indexed_ensemble(std::size_t n, unsigned threads,
                                               Fn fn) {
    std::vector<TrajectoryRecord> out(n);
    const unsigned nt = std::max(1u, std::min<unsigned>(threads, unsigned(n)));
    if (nt == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mtx;
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nt) out[i] = fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(err_mtx);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Abstract engine: memoryless detection with mean first-photon time tau_m and
// tracker phase phi(t) = phi0 + 2 pi nu10 t.
struct AbstractEngine {
    double tau_m = 1.0;
    double nu10 = 0.0;
    double t_max = std::numeric_limits<double>::infinity();

    AbstractEngine(double tau_m_, double nu10_,
                   double t_max_ = std::numeric_limits<double>::infinity())
        : tau_m(tau_m_), nu10(nu10_), t_max(t_max_) {
        if (!(tau_m > 0.0)) throw ConfigError("AbstractEngine: tau_m must be > 0");
        if (!(nu10 >= 0.0)) throw ConfigError("AbstractEngine: nu10 must be >= 0");
        if (!(t_max > 0.0)) throw ConfigError("AbstractEngine: t_max must be > 0");
    }

    double phase_at(double t, double phi0) const {
        return wrap_2pi(phi0 + kTwoPi * nu10 * t);
    }

    TrajectoryRecord run(const TwoStateAmplitudes& s0,
                         const MeasurementModel& model, Rng& rng) const {
        TrajectoryRecord rec;
        rec.mode = to_string(TrajectoryMode::Abstract);
        rec.alpha = s0.alpha;
        rec.phi0 = s0.phi;
        const double t_cand = rng.exponential(tau_m);
        if (t_cand > t_max) {
            rec.terminal = "dark-0";
            rec.censored = true;
            return rec;
        }
        const double phi = phase_at(t_cand, s0.phi);
        rec.phase_tag = phi;
        if (rng.uniform() < model.p0(s0.alpha, phi).p0) {
            rec.terminal = "dark-0";
        } else {
            rec.terminal = "measured-1";
            rec.n_photons = 1;
            rec.jump_times.push_back(t_cand);
            rec.phase_at_jump.push_back(phi);
        }
        return rec;
    }
};

// ---------------------------------------------------------------------------
// Continuous engine: constant resonant detection drive (delta = 0), exact
// 2x2 matrix-exponential evolution of the bright branch.  Every detection
// resets the bright amplitude to (1, 0); all jumps up to t_max are recorded.
struct ContinuousEngine {
    double omega_r = 0.0;
    double gamma2 = 0.0;
    double nu10 = 0.0;
    double t_max = 0.0;
    double tau_m = 0.0;  // exact mean first-jump time
    PhaseReference phase_ref = PhaseReference::C1Branch;

    ContinuousEngine(double omega_r_, double gamma2_, double nu10_, double t_max_,
                     PhaseReference ref = PhaseReference::C1Branch)
        : omega_r(omega_r_), gamma2(gamma2_), nu10(nu10_), t_max(t_max_),
          phase_ref(ref) {
        if (!(omega_r > 0.0))
            throw ConfigError("ContinuousEngine: omega_r must be > 0");
        if (!(gamma2 > 0.0))
            throw ConfigError("ContinuousEngine: gamma2 must be > 0");
        if (!(t_max > 0.0))
            throw ConfigError("ContinuousEngine: t_max must be > 0");
        Eigen::Matrix2cd a;
        a << 0.0, complexd(0.0, -0.5 * omega_r),
            complexd(0.0, -0.5 * omega_r), complexd(-0.5 * gamma2, 0.0);
        Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(a);
        lam_ = es.eigenvalues();
        v_ = es.eigenvectors();
        if (std::abs(v_.determinant()) < 1e-8)
            throw NumericsError(
                "ContinuousEngine: defective drive matrix (omega_r = gamma2/2 "
                "critical damping); perturb the parameters");
        a0_ = v_.inverse() * Eigen::Vector2cd(1.0, 0.0);
        tau_m = survival_integral();
    }

    Eigen::Vector2cd bright_state(double dt) const {
        return v_ * Eigen::Vector2cd(a0_[0] * std::exp(lam_[0] * dt),
                                     a0_[1] * std::exp(lam_[1] * dt));
    }

    // no-jump survival ||psi(dt)||^2 from a fresh (1, 0) start
    double norm2(double dt) const { return bright_state(dt).squaredNorm(); }

    double phase_at(double t, double phi0) const {
        const Eigen::Vector2cd v = bright_state(t);
        // on resonance the drive phase is constant, so FoldC2 adds c2 directly
        const complexd ref =
            phase_ref == PhaseReference::FoldC2 ? v[0] + v[1] : v[0];
        return wrap_2pi(phi0 + kTwoPi * nu10 * t + std::arg(ref));
    }

    // first dt with norm2(dt) <= u, or nullopt if it stays above u for rem
    std::optional<double> first_passage(double u, double rem) const {
        if (!(rem > 0.0) || norm2(rem) >= u) return std::nullopt;
        double lo = 0.0, hi = rem;
        // bisection; norm2 is monotone nonincreasing
        for (int i = 0; i < 200 && hi - lo > 1e-13 * (tau_m + hi); ++i) {
            const double mid = 0.5 * (lo + hi);
            (norm2(mid) >= u ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    TrajectoryRecord run(const TwoStateAmplitudes& s0,
                         const MeasurementModel& model, Rng& rng) const {
        TrajectoryRecord rec;
        rec.mode = to_string(TrajectoryMode::Continuous);
        rec.alpha = s0.alpha;
        rec.phi0 = s0.phi;
        const auto cand = first_passage(rng.uniform(), t_max);
        if (!cand) {
            rec.terminal = "dark-0";
            rec.censored = true;
            return rec;
        }
        const double phi_star = phase_at(*cand, s0.phi);
        rec.phase_tag = phi_star;
        if (rng.uniform() < model.p0(s0.alpha, phi_star).p0) {
            rec.terminal = "dark-0";
            return rec;
        }
        rec.terminal = "measured-1";
        double t = *cand;
        rec.jump_times.push_back(t);
        rec.phase_at_jump.push_back(phi_star);
        // bright branch keeps scattering; record every re-excitation
        while (true) {
            const auto nxt = first_passage(rng.uniform(), t_max - t);
            if (!nxt) break;
            t += *nxt;
            rec.jump_times.push_back(t);
            rec.phase_at_jump.push_back(phase_at(t, s0.phi));
        }
        rec.n_photons = rec.jump_times.size();
        return rec;
    }

  private:
    double survival_integral() const {
        // integral over [0, inf) of ||sum_i a_i e^(lam_i t) u_i||^2
        double s = 0.0;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                const complexd lap = lam_[i] + std::conj(lam_[j]);
                if (lap.real() > -1e-300)
                    throw NumericsError(
                        "ContinuousEngine: non-decaying mode, tau_m diverges");
                const complexd overlap = v_.col(j).adjoint() * v_.col(i);
                s -= (a0_[i] * std::conj(a0_[j]) * overlap / lap).real();
            }
        }
        return s;
    }

    Eigen::Vector2cd lam_;
    Eigen::Matrix2cd v_;
    Eigen::Vector2cd a0_;
};

// ---------------------------------------------------------------------------
// Pulsed engine: the full FM waveform with one optimized phase-jump pulse per
// modulation cycle.  One cycle is integrated once (with decay and the jump);
// everything else is closed-form linear algebra on its propagator
//   U = V diag(lam) V^-1,
// so trajectories over 1e4..1e6 cycles cost O(log n_cycles) per event.  Jump
// instants are located by bisection to 1e-6 of a modulation period.

// The design as actually run when the modulation is retuned to keep the
// tracker phase stationary from cycle to cycle: nu_mod -> nu_mod', with the
// jump re-derived for the new period.
inline PulseDesign locked_design(const PulseDesign& input, double nu10,
                                 double tol = 1e-10) {
    PulseDesign d = input;
    const CorrectedModulation cm =
        corrected_modulation(d.base, d.stark_per_cycle, nu10);
    d.base.nu_mod = cm.nu_mod_prime;
    d.jump_time = d.base.resonance_time(0);
    d.jump_phase = closed_form_jump_phase(d.base, tol);
    return d;
}
struct PulsedEngine {
    PulseDesign design;       // as run (corrected when stark_locked)
    DriveWaveform cycle_wf;   // one cycle, decay on, jump scheduled
    double period = 0.0;
    double nu10 = 0.0;
    long long n_cycles = 0;
    bool stark_locked = false;
    PhaseReference phase_ref = PhaseReference::C1Branch;
    double s_signed = 0.0;        // per-cycle tracker-phase increment, arg lam1
    double p_first_cycle = 0.0;   // 1 - ||U e1||^2
    DrivenPropagatorPath path;

    struct Passage {
        long long cycle = 0;  // boundary-relative cycle index
        double tau = 0.0;     // offset in [0, period]
    };

    PulsedEngine(const PulseDesign& input, double nu10_, long long n_cycles_,
                 bool stark_locked_, double tol = 1e-10,
                 PhaseReference ref = PhaseReference::C1Branch)
        : nu10(nu10_), n_cycles(n_cycles_), stark_locked(stark_locked_),
          phase_ref(ref) {
        if (n_cycles < 1) throw ConfigError("PulsedEngine: n_cycles must be >= 1");
        if (!(nu10 >= 0.0)) throw ConfigError("PulsedEngine: nu10 must be >= 0");
        if (!(input.base.gamma2 > 0.0))
            throw ConfigError("PulsedEngine: design needs gamma2 > 0");
        design = stark_locked ? locked_design(input, nu10, tol) : input;
        cycle_wf = design.waveform_with_jump();
        period = cycle_wf.period();
        path = driven_propagator_path(cycle_wf, 0.0, period, tol);
        u_ = path.end();
        Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(u_);
        lam_ = es.eigenvalues();
        v_ = es.eigenvectors();
        if (std::abs(v_.determinant()) < 1e-8)
            throw NumericsError("PulsedEngine: defective cycle propagator");
        vinv_ = v_.inverse();
        a0_ = vinv_ * Eigen::Vector2cd(1.0, 0.0);
        const int dom = std::abs(lam_[0]) >= std::abs(lam_[1]) ? 0 : 1;
        s_signed = std::arg(lam_[dom]);
        p_first_cycle = 1.0 - (u_ * Eigen::Vector2cd(1.0, 0.0)).squaredNorm();
        bisect_tol_ = 1e-6 * period;
        drive_phase_cycle_ = cycle_wf.drive_phase(period);
    }

    const Eigen::Matrix2cd& cycle_propagator() const { return u_; }
    const Eigen::Vector2cd& multipliers() const { return lam_; }

    Eigen::Vector2cd powered(const Eigen::Vector2cd& w, long long k) const {
        if (k == 0) return w;
        const Eigen::Vector2cd c = vinv_ * w;
        Eigen::Vector2cd out;
        for (int i = 0; i < 2; ++i)
            out[i] = c[i] * std::pow(lam_[i], double(k));
        return v_ * out;
    }

    // reference bright amplitude at absolute time k*T + tau from a (1,0) start
    complexd ref_c1(long long k, double tau) const {
        const Eigen::Vector2cd wk = powered(Eigen::Vector2cd(1.0, 0.0), k);
        const Eigen::Vector2cd v = path.at(tau) * wk;
        if (phase_ref == PhaseReference::FoldC2) {
            // fold c2 back onto |1> in the non-rotating frame
            const double phi_d =
                double(k) * drive_phase_cycle_ + cycle_wf.drive_phase(tau);
            return v[0] + v[1] * std::exp(-kI * phi_d);
        }
        return v[0];
    }

    // tracker phase at absolute time t = k*T + tau
    double phase_at(long long k, double tau, double phi0) const {
        const double t = double(k) * period + tau;
        return wrap_2pi(phi0 + kTwoPi * nu10 * t + std::arg(ref_c1(k, tau)));
    }

    // expected first-jump time (asymptotic, from the dominant multiplier)
    double mean_jump_time() const {
        const double per_cycle =
            1.0 - std::norm(lam_[std::abs(lam_[0]) >= std::abs(lam_[1]) ? 0 : 1]);
        if (!(per_cycle > 0.0))
            throw NumericsError("PulsedEngine: no per-cycle loss, tau_m diverges");
        return period / per_cycle;
    }

    // first time at/after boundary k0 where the survival ||w(t)||^2 crosses
    // target, with w the bright vector at boundary k0; nullopt = survives to
    // the horizon.  Monotone in both the boundary index and the offset.
    std::optional<Passage> first_passage(const Eigen::Vector2cd& w, long long k0,
                                         double target) const {
        const long long rem = n_cycles - k0;
        if (rem <= 0) return std::nullopt;
        if (powered(w, rem).squaredNorm() >= target) return std::nullopt;
        long long lo = 0, hi = rem;  // ||w(lo)||^2 >= target > ||w(hi)||^2
        while (hi - lo > 1) {
            const long long mid = lo + (hi - lo) / 2;
            (powered(w, mid).squaredNorm() >= target ? lo : hi) = mid;
        }
        const Eigen::Vector2cd wk = powered(w, lo);
        double ta = 0.0, tb = period;
        while (tb - ta > bisect_tol_) {
            const double mid = 0.5 * (ta + tb);
            ((path.at(mid) * wk).squaredNorm() >= target ? ta : tb) = mid;
        }
        return Passage{k0 + lo, 0.5 * (ta + tb)};
    }

    TrajectoryRecord run(const TwoStateAmplitudes& s0,
                         const MeasurementModel& model, Rng& rng) const {
        TrajectoryRecord rec;
        rec.mode = to_string(TrajectoryMode::Pulsed);
        rec.alpha = s0.alpha;
        rec.phi0 = s0.phi;
        const Eigen::Vector2cd e1(1.0, 0.0);

        const auto cand = first_passage(e1, 0, rng.uniform());
        if (!cand) {
            rec.terminal = "dark-0";
            rec.censored = true;
            return rec;
        }
        const double phi_star = phase_at(cand->cycle, cand->tau, s0.phi);
        rec.phase_tag = phi_star;
        if (rng.uniform() < model.p0(s0.alpha, phi_star).p0) {
            rec.terminal = "dark-0";
            return rec;
        }
        rec.terminal = "measured-1";
        Passage cur = *cand;
        rec.jump_times.push_back(double(cur.cycle) * period + cur.tau);
        rec.phase_at_jump.push_back(phi_star);

        // bright branch: every detection resets the atom to (1, 0) mid-cycle;
        // finish the partial cycle exactly, then continue boundary-aligned
        while (true) {
            const double u_r = rng.uniform();
            const Eigen::Vector2cd z = path.at(cur.tau).inverse() * e1;
            const double end_norm2 = (u_ * z).squaredNorm();
            if (end_norm2 < u_r) {
                // re-excitation within the same cycle
                double ta = cur.tau, tb = period;
                while (tb - ta > bisect_tol_) {
                    const double mid = 0.5 * (ta + tb);
                    ((path.at(mid) * z).squaredNorm() >= u_r ? ta : tb) = mid;
                }
                cur.tau = 0.5 * (ta + tb);
            } else {
                const auto nxt = first_passage(u_ * z, cur.cycle + 1, u_r);
                if (!nxt) break;
                cur = *nxt;
            }
            rec.jump_times.push_back(double(cur.cycle) * period + cur.tau);
            rec.phase_at_jump.push_back(phase_at(cur.cycle, cur.tau, s0.phi));
        }
        rec.n_photons = rec.jump_times.size();
        return rec;
    }

  private:
    Eigen::Matrix2cd u_;
    Eigen::Vector2cd lam_;
    Eigen::Matrix2cd v_, vinv_;
    Eigen::Vector2cd a0_;
    double bisect_tol_ = 0.0;
    double drive_phase_cycle_ = 0.0;
};

// ---------------------------------------------------------------------------
// Facade owning one prepared engine; trajectory `stream` i is bitwise
// deterministic given (seed, i) regardless of threading.
class TrajectorySimulator {
  public:
    static TrajectorySimulator abstract(
        double tau_m, double nu10,
        double t_max = std::numeric_limits<double>::infinity()) {
        TrajectorySimulator s;
        s.abstract_.emplace(tau_m, nu10, t_max);
        return s;
    }

    static TrajectorySimulator continuous(
        double omega_r, double gamma2, double nu10, double t_max,
        PhaseReference ref = PhaseReference::C1Branch) {
        TrajectorySimulator s;
        s.continuous_.emplace(omega_r, gamma2, nu10, t_max, ref);
        return s;
    }

    static TrajectorySimulator pulsed(const PulseDesign& design, double nu10,
                                      long long n_cycles, bool stark_locked,
                                      double tol = 1e-10,
                                      PhaseReference ref = PhaseReference::C1Branch) {
        TrajectorySimulator s;
        s.pulsed_.emplace(design, nu10, n_cycles, stark_locked, tol, ref);
        return s;
    }

    TrajectoryMode mode() const {
        if (abstract_) return TrajectoryMode::Abstract;
        if (continuous_) return TrajectoryMode::Continuous;
        return TrajectoryMode::Pulsed;
    }

    const AbstractEngine& abstract_engine() const { return *abstract_; }
    const ContinuousEngine& continuous_engine() const { return *continuous_; }
    const PulsedEngine& pulsed_engine() const { return *pulsed_; }

    double mean_jump_time() const {
        if (abstract_) return abstract_->tau_m;
        if (continuous_) return continuous_->tau_m;
        return pulsed_->mean_jump_time();
    }

    TrajectoryRecord run(const TwoStateAmplitudes& s0,
                         const MeasurementModel& model, std::uint64_t seed,
                         std::uint64_t stream) const {
        Rng rng(seed, stream);
        TrajectoryRecord rec;
        if (abstract_)
            rec = abstract_->run(s0, model, rng);
        else if (continuous_)
            rec = continuous_->run(s0, model, rng);
        else
            rec = pulsed_->run(s0, model, rng);
        rec.seed = seed;
        rec.stream = stream;
        return rec;
    }

    std::vector<TrajectoryRecord> ensemble(const TwoStateAmplitudes& s0,
                                           const MeasurementModel& model,
                                           std::size_t n, std::uint64_t seed,
                                           unsigned threads = 1) const {
        if (n == 0) throw ConfigError("ensemble: n must be > 0");
        return run_indexed([&](std::size_t) { return s0; }, model, n, seed,
                           threads);
    }

    // per-record preparation states (e.g. a scanned phase grid); record i uses
    // states[i] and stream i
    std::vector<TrajectoryRecord> ensemble(
        std::span<const TwoStateAmplitudes> states,
        const MeasurementModel& model, std::uint64_t seed,
        unsigned threads = 1) const {
        if (states.empty()) throw ConfigError("ensemble: no states");
        return run_indexed([&](std::size_t i) { return states[i]; }, model,
                           states.size(), seed, threads);
    }

  private:
    TrajectorySimulator() = default;

    template <class StateOf>
    std::vector<TrajectoryRecord> run_indexed(StateOf state_of,
                                              const MeasurementModel& model,
                                              std::size_t n, std::uint64_t seed,
                                              unsigned threads) const {
        return detail::indexed_ensemble(n, threads, [&](std::size_t i) {
            return run(state_of(i), model, seed, i);
        });
    }

    std::optional<AbstractEngine> abstract_;
    std::optional<ContinuousEngine> continuous_;
    std::optional<PulsedEngine> pulsed_;
};

// ---------------------------------------------------------------------------
// Ensemble statistics

struct EnsembleStats {
    stats::Histogram phase_hist;       // pooled jump phases over [0, 2pi)
    std::vector<double> phase_freq;    // normalized bin frequencies (sum 1)
    std::vector<double> phase_err;     // binomial standard errors per bin
    stats::CircularSummary circular;   // of pooled jump phases
    std::size_t n_records = 0;
    std::size_t n_measured = 0;
    std::size_t n_dark = 0;      // dark-0 + dark-1
    std::size_t n_pumped = 0;    // pumped-dark (selection scheme)
    std::size_t n_censored = 0;
    std::size_t n_jumps = 0;
};

inline void to_json(nlohmann::json& j, const EnsembleStats& s) {
    std::vector<double> centers(s.phase_hist.counts.size());
    for (std::size_t i = 0; i < centers.size(); ++i)
        centers[i] = s.phase_hist.bin_center(i);
    j = nlohmann::json{{"bin_centers", centers},
                       {"bin_counts", s.phase_hist.counts},
                       {"bin_freq", s.phase_freq},
                       {"bin_freq_err", s.phase_err},
                       {"phase_concentration_R", s.circular.r},
                       {"phase_circular_mean", s.circular.mean_angle},
                       {"phase_circular_sd", s.circular.stddev},
                       {"n_records", s.n_records},
                       {"n_measured", s.n_measured},
                       {"n_dark", s.n_dark},
                       {"n_pumped", s.n_pumped},
                       {"n_censored", s.n_censored},
                       {"n_jumps", s.n_jumps}};
}

// Pooled phase-at-jump statistics; nbins over [0, 2pi).  R near 1 signals a
// phase-selective (pulsed) measurement, R near 0 a phase-blind one.
inline EnsembleStats phase_selectivity(std::span<const TrajectoryRecord> records,
                                       std::size_t nbins = 32) {
    if (records.empty())
        throw ConfigError("phase_selectivity: no records");
    if (nbins < 2) throw ConfigError("phase_selectivity: need >= 2 bins");
    EnsembleStats out;
    out.n_records = records.size();
    std::vector<double> phases;
    for (const auto& r : records) {
        if (r.terminal == "measured-1") ++out.n_measured;
        else if (r.terminal == "dark-0" || r.terminal == "dark-1") ++out.n_dark;
        else if (r.terminal == "pumped-dark") ++out.n_pumped;
        if (r.censored) ++out.n_censored;
        phases.insert(phases.end(), r.phase_at_jump.begin(),
                      r.phase_at_jump.end());
    }
    out.n_jumps = phases.size();
    if (phases.empty())
        throw ConfigError("phase_selectivity: no jump events in ensemble");
    out.phase_hist = stats::histogram(phases, 0.0, kTwoPi, nbins);
    out.circular = stats::circular_summary(phases);
    const double n = double(phases.size());
    out.phase_freq.resize(nbins);
    out.phase_err.resize(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        const double p = double(out.phase_hist.counts[b]) / n;
        out.phase_freq[b] = p;
        out.phase_err[b] = std::sqrt(std::max(0.0, p * (1.0 - p) / n));
    }
    return out;
}

struct SurvivalPoint {
    double t = 0.0;        // window end
    double survival = 0.0; // fraction with no jump by t
    double lo = 0.0;       // Wilson 95% interval
    double hi = 0.0;
};

inline void to_json(nlohmann::json& j, const SurvivalPoint& p) {
    j = nlohmann::json{
        {"t", p.t}, {"survival", p.survival}, {"lo", p.lo}, {"hi", p.hi}};
}

// No-jump survival fraction on a uniform time grid; dark records survive
// forever, so the curve plateaus near alpha^2.
inline std::vector<SurvivalPoint> survival_curve(
    std::span<const TrajectoryRecord> records, double t_end,
    std::size_t n_points = 100) {
    if (records.empty()) throw ConfigError("survival_curve: no records");
    if (!(t_end > 0.0)) throw ConfigError("survival_curve: t_end must be > 0");
    if (n_points < 2) throw ConfigError("survival_curve: need >= 2 points");
    std::vector<double> first;
    first.reserve(records.size());
    for (const auto& r : records)
        first.push_back(r.jump_times.empty()
                            ? std::numeric_limits<double>::infinity()
                            : r.jump_times.front());
    std::sort(first.begin(), first.end());
    std::vector<SurvivalPoint> out(n_points);
    const double n = double(first.size());
    for (std::size_t i = 0; i < n_points; ++i) {
        const double t = t_end * double(i) / double(n_points - 1);
        const auto it = std::upper_bound(first.begin(), first.end(), t);
        const std::size_t surv = std::size_t(first.end() - it);
        const stats::WilsonInterval w = stats::wilson_interval(surv, first.size());
        out[i] = {t, double(surv) / n, w.lo, w.hi};
    }
    return out;
}

struct DriftFit {
    double slope = 0.0;       // radians of tracker phase per cycle
    double slope_se = 0.0;
    double intercept = 0.0;
    std::size_t n_bins = 0;
};

// Per-cycle drift of the mean jump phase: circular mean per cycle index,
// unwrapped along the cycle axis, then a least-squares line.  A stationary
// (Stark-corrected) pulse train gives slope ~ 0.
inline DriftFit jump_phase_drift(std::span<const TrajectoryRecord> records,
                                 double period) {
    if (!(period > 0.0)) throw ConfigError("jump_phase_drift: period must be > 0");
    std::map<long long, std::pair<double, double>> acc;  // k -> (sum cos, sum sin)
    for (const auto& r : records) {
        for (std::size_t i = 0; i < r.jump_times.size(); ++i) {
            const long long k = (long long)std::floor(r.jump_times[i] / period);
            auto& [c, s] = acc[k];
            c += std::cos(r.phase_at_jump[i]);
            s += std::sin(r.phase_at_jump[i]);
        }
    }
    if (acc.size() < 3)
        throw ConfigError("jump_phase_drift: need jumps in >= 3 distinct cycles");
    std::vector<double> ks, means;
    double prev = 0.0;
    bool have_prev = false;
    for (const auto& [k, cs] : acc) {
        double m = std::atan2(cs.second, cs.first);
        if (have_prev)  // unwrap along increasing k
            m += kTwoPi * std::round((prev - m) / kTwoPi);
        prev = m;
        have_prev = true;
        ks.push_back(double(k));
        means.push_back(m);
    }
    const stats::LineFit f = stats::fit_line(ks, means);
    return {f.slope, f.se_slope, f.intercept, ks.size()};
}

inline void write_records_jsonl(std::ostream& os,
                                std::span<const TrajectoryRecord> records) {
    for (const auto& r : records) {
        const nlohmann::json j = r;
        os << j.dump() << "\n";
    }
}

inline std::vector<TrajectoryRecord> read_records_jsonl(std::istream& is) {
    std::vector<TrajectoryRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(nlohmann::json::parse(line).get<TrajectoryRecord>());
    }
    return out;
}

}  // namespace phasejump
