#pragma once

// Optical Bloch equations for the driven |1>-|2> detection transition with a
// frequency-modulated laser, |0> a spectator.  Written in the rotating frame
// under the RWA with the instantaneous-detuning convention: the state carries
// b2 = c2 * exp(i * integral of delta), so
//
//   dc1/dt = -i (omega_r/2) b2
//   db2/dt = -i (omega_r/2) c1 + (i delta(t) - gamma2/2) b2
//
// and a drive-phase jump theta maps b2 -> b2 * exp(i theta).  delta(t) =
// 2 pi nu_off (1 + cos(2 pi nu_mod t)) touches resonance once per modulation
// cycle.  Units are dimensionless with gamma2 = 1 as the reference scale.

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "phasejump/core.hpp"
#include "phasejump/errors.hpp"
#include "phasejump/ode.hpp"

namespace phasejump {

using complexd = std::complex<double>;
inline constexpr complexd kI{0.0, 1.0};

struct PhaseJump {
    double time = 0.0;
    double theta = 0.0;  // radians added to the drive phase
};

// Detection-laser program.  Frequencies are cyclic (nu = omega / 2 pi); the
// from_angular factory accepts the angular set {2 pi nu_off, 2 pi nu_mod,
// omega_r, gamma2} directly.
struct DriveWaveform {
    double nu_off = 0.0;
    double nu_mod = 1.0;
    double omega_r = 0.0;
    double gamma2 = 1.0;
    std::vector<PhaseJump> jump_schedule;
    int n_cycles = 1;

    static DriveWaveform from_angular(double two_pi_nu_off, double two_pi_nu_mod,
                                      double omega_r, double gamma2) {
        DriveWaveform wf;
        wf.nu_off = two_pi_nu_off / kTwoPi;
        wf.nu_mod = two_pi_nu_mod / kTwoPi;
        wf.omega_r = omega_r;
        wf.gamma2 = gamma2;
        wf.validate();
        return wf;
    }

    void validate() const {
        if (!(nu_mod > 0.0)) throw ConfigError("DriveWaveform: nu_mod must be > 0");
        if (nu_off < 0.0) throw ConfigError("DriveWaveform: nu_off must be >= 0");
        if (omega_r < 0.0) throw ConfigError("DriveWaveform: omega_r must be >= 0");
        if (gamma2 < 0.0) throw ConfigError("DriveWaveform: gamma2 must be >= 0");
        if (n_cycles < 1) throw ConfigError("DriveWaveform: n_cycles must be >= 1");
        for (std::size_t i = 1; i < jump_schedule.size(); ++i)
            if (!(jump_schedule[i].time > jump_schedule[i - 1].time))
                throw ConfigError(
                    "DriveWaveform: jump_schedule times must be strictly increasing");
    }

    double period() const { return 1.0 / nu_mod; }

    // delta(t), angular frequency; zero (resonance) at the cos = -1 extremum.
    double detuning_at(double t) const {
        return kTwoPi * nu_off * (1.0 + std::cos(kTwoPi * nu_mod * t));
    }

    // k-th resonance instant (delta minimum), t = (k + 1/2) T.
    double resonance_time(int k = 0) const {
        return (double(k) + 0.5) * period();
    }

    // Accumulated drive phase: integral of delta plus scheduled jumps up to
    // and including t.
    double drive_phase(double t) const {
        double phase =
            kTwoPi * nu_off *
            (t + std::sin(kTwoPi * nu_mod * t) / (kTwoPi * nu_mod));
        for (const auto& j : jump_schedule) {
            if (j.time <= t) phase += j.theta;
        }
        return phase;
    }

    DriveWaveform with_jump(double t, double theta) const {
        DriveWaveform wf = *this;
        wf.jump_schedule.push_back({t, theta});
        std::sort(wf.jump_schedule.begin(), wf.jump_schedule.end(),
                  [](const PhaseJump& a, const PhaseJump& b) {
                      return a.time < b.time;
                  });
        wf.validate();
        return wf;
    }

    DriveWaveform without_jumps() const {
        DriveWaveform wf = *this;
        wf.jump_schedule.clear();
        return wf;
    }

    DriveWaveform with_gamma2(double g) const {
        DriveWaveform wf = *this;
        wf.gamma2 = g;
        wf.validate();
        return wf;
    }

    // Repeat this waveform's single-cycle jump schedule every cycle for
    // n total cycles (used by pulse-train simulations).
    DriveWaveform repeated(int n) const {
        DriveWaveform wf = *this;
        wf.n_cycles = n;
        wf.jump_schedule.clear();
        const double T = period();
        for (int k = 0; k < n; ++k)
            for (const auto& j : jump_schedule)
                wf.jump_schedule.push_back({j.time + double(k) * T, j.theta});
        wf.validate();
        return wf;
    }
};

enum class Representation { Amplitude, DensityMatrix };

// Driven-system state.  Amplitude mode holds (c0, c1, b2) and decays in norm
// under gamma2 (the no-jump branch of the unraveling); density-matrix mode is
// the Lindblad ensemble average with the closed-transition decay |2> -> |1>.
struct AtomState {
    Representation rep = Representation::Amplitude;
    Eigen::Vector3cd amps = Eigen::Vector3cd::Zero();
    Eigen::Matrix3cd rho = Eigen::Matrix3cd::Zero();

    static AtomState pure(complexd c0, complexd c1, complexd b2) {
        AtomState s;
        s.rep = Representation::Amplitude;
        s.amps << c0, c1, b2;
        return s;
    }

    // Detection ground state |1>.
    static AtomState ground() { return pure(0.0, 1.0, 0.0); }

    static AtomState density(const Eigen::Matrix3cd& rho) {
        AtomState s;
        s.rep = Representation::DensityMatrix;
        s.rho = 0.5 * (rho + rho.adjoint());  // symmetrize input
        return s;
    }

    AtomState as_density() const {
        if (rep == Representation::DensityMatrix) return *this;
        return density(amps * amps.adjoint());
    }

    double p2() const {
        return rep == Representation::Amplitude ? std::norm(amps[2])
                                                : rho(2, 2).real();
    }
    double p1() const {
        return rep == Representation::Amplitude ? std::norm(amps[1])
                                                : rho(1, 1).real();
    }
    double norm2() const {
        return rep == Representation::Amplitude ? amps.squaredNorm()
                                                : rho.trace().real();
    }
    complexd c1() const {
        if (rep != Representation::Amplitude)
            throw NumericsError("AtomState::c1: amplitude mode only");
        return amps[1];
    }

    // Drive-phase jump theta: b2 picks up exp(i theta); in density-matrix
    // form the |2> row/column coherences rotate.
    AtomState with_phase_jump(double theta) const {
        AtomState s = *this;
        const complexd u = std::exp(kI * theta);
        if (rep == Representation::Amplitude) {
            s.amps[2] *= u;
        } else {
            for (int j = 0; j < 3; ++j) {
                s.rho(2, j) *= u;
                s.rho(j, 2) *= std::conj(u);
            }
            s.rho(2, 2) = complexd(s.rho(2, 2).real(), 0.0);
        }
        return s;
    }
};

// Derivative in each representation.  Exposed for direct testing; the
// integrator uses the flattened forms below.
inline AtomState rhs(const AtomState& state, const DriveWaveform& wf, double t) {
    AtomState d;
    d.rep = state.rep;
    const double half_omega = 0.5 * wf.omega_r;
    const double delta = wf.detuning_at(t);
    if (state.rep == Representation::Amplitude) {
        const complexd c1 = state.amps[1], b2 = state.amps[2];
        d.amps[0] = 0.0;  // spectator: frame removes the free phase
        d.amps[1] = -kI * half_omega * b2;
        d.amps[2] = -kI * half_omega * c1 + (kI * delta - 0.5 * wf.gamma2) * b2;
    } else {
        Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
        h(1, 2) = half_omega;
        h(2, 1) = half_omega;
        h(2, 2) = -delta;
        const Eigen::Matrix3cd& r = state.rho;
        Eigen::Matrix3cd lind = Eigen::Matrix3cd::Zero();
        // gamma2 (|1><2| r |2><1| - 1/2 {|2><2|, r})
        lind(1, 1) = wf.gamma2 * r(2, 2);
        for (int j = 0; j < 3; ++j) {
            lind(2, j) -= 0.5 * wf.gamma2 * r(2, j);
            lind(j, 2) -= 0.5 * wf.gamma2 * r(j, 2);
        }
        d.rho = -kI * (h * r - r * h) + lind;
    }
    return d;
}

namespace detail {

inline void rhs_amplitude_flat(const DriveWaveform& wf, double t,
                               const ode::State& y, ode::State& dy) {
    const double half_omega = 0.5 * wf.omega_r;
    const double delta = wf.detuning_at(t);
    dy[0] = 0.0;
    dy[1] = -kI * half_omega * y[2];
    dy[2] = -kI * half_omega * y[1] + (kI * delta - 0.5 * wf.gamma2) * y[2];
    // optional quadrature component: d/dt of integral(rate * |b2|^2)
    if (y.size() == 4) dy[3] = std::norm(y[2]);
}

inline void rhs_density_flat(const DriveWaveform& wf, double t,
                             const ode::State& y, ode::State& dy) {
    Eigen::Map<const Eigen::Matrix3cd> r(y.data());
    Eigen::Map<Eigen::Matrix3cd> dr(dy.data());
    const double half_omega = 0.5 * wf.omega_r;
    const double delta = wf.detuning_at(t);
    Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
    h(1, 2) = half_omega;
    h(2, 1) = half_omega;
    h(2, 2) = -delta;
    dr = -kI * (h * r - r * h);
    dr(1, 1) += wf.gamma2 * r(2, 2);
    for (int j = 0; j < 3; ++j) {
        dr(2, j) -= 0.5 * wf.gamma2 * r(2, j);
        dr(j, 2) -= 0.5 * wf.gamma2 * r(j, 2);
    }
}

// Requested tolerance refers to the accuracy of sampled solution values; the
// integrator runs tighter internally so accumulated global error stays within
// the user's budget.
inline constexpr double kTolSafety = 100.0;

inline ode::Options make_options(double tol) {
    if (!(tol >= 1e-12 && tol <= 1e-4))
        throw ConfigError("integrate: tol must lie in [1e-12, 1e-4]");
    ode::Options opt;
    opt.rtol = tol / kTolSafety;
    opt.atol = opt.rtol * 1e-3;
    return opt;
}

}  // namespace detail

struct PathResult {
    ode::DensePath path;      // flattened state interpolant over [t0, t1]
    AtomState final_state;
    ode::Diagnostics diag;
};

// Integrate from t0 to t1, applying scheduled drive-phase jumps exactly at
// their times (segment boundaries).  Conservation watchdogs run on every
// accepted step: norm for gamma2 = 0 amplitude evolution, trace and
// positivity in density-matrix mode.
inline PathResult integrate_path(const AtomState& s0, const DriveWaveform& wf,
                                 double t0, double t1, double tol) {
    wf.validate();
    const ode::Options opt = detail::make_options(tol);
    const double guard = std::max(1e-9, 200.0 * tol);

    PathResult out;
    out.final_state = s0;

    std::function<void(double, const ode::State&)> watchdog;
    if (s0.rep == Representation::Amplitude) {
        if (wf.gamma2 == 0.0) {
            watchdog = [guard](double t, const ode::State& y) {
                const double n2 = std::norm(y[0]) + std::norm(y[1]) + std::norm(y[2]);
                if (std::abs(n2 - 1.0) > guard)
                    throw NumericsError("integrate: norm drift " +
                                        std::to_string(n2 - 1.0) + " at t = " +
                                        std::to_string(t));
            };
        }
    } else {
        watchdog = [guard](double t, const ode::State& y) {
            Eigen::Map<const Eigen::Matrix3cd> r(y.data());
            const double tr = r.trace().real();
            if (std::abs(tr - 1.0) > guard)
                throw NumericsError("integrate: trace drift " +
                                    std::to_string(tr - 1.0) + " at t = " +
                                    std::to_string(t));
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es;
            es.computeDirect(r, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -guard)
                throw NumericsError("integrate: negative population " +
                                    std::to_string(es.eigenvalues().minCoeff()) +
                                    " at t = " + std::to_string(t));
        };
    }

    // flatten
    ode::State y;
    if (s0.rep == Representation::Amplitude) {
        y.resize(3);
        y << s0.amps[0], s0.amps[1], s0.amps[2];
    } else {
        y.resize(9);
        Eigen::Map<Eigen::Matrix3cd>(y.data()) = s0.rho;
    }

    const auto rhs_flat = [&wf, rep = s0.rep](double t, const ode::State& v,
                                              ode::State& dv) {
        if (rep == Representation::Amplitude)
            detail::rhs_amplitude_flat(wf, t, v, dv);
        else
            detail::rhs_density_flat(wf, t, v, dv);
    };

    double t = t0;
    std::size_t next_jump = 0;
    while (next_jump < wf.jump_schedule.size() &&
           wf.jump_schedule[next_jump].time <= t0)
        ++next_jump;

    while (true) {
        double t_stop = t1;
        bool at_jump = false;
        if (next_jump < wf.jump_schedule.size() &&
            wf.jump_schedule[next_jump].time < t1) {
            t_stop = wf.jump_schedule[next_jump].time;
            at_jump = true;
        }
        auto seg = ode::integrate(rhs_flat, t, std::move(y), t_stop, opt, watchdog);
        y = std::move(seg.y);
        out.path.append(std::move(seg.path));
        out.diag.merge(seg.diag);
        t = t_stop;
        if (!at_jump) break;
        const double theta = wf.jump_schedule[next_jump].theta;
        const complexd u = std::exp(kI * theta);
        if (s0.rep == Representation::Amplitude) {
            y[2] *= u;
        } else {
            Eigen::Map<Eigen::Matrix3cd> r(y.data());
            for (int j = 0; j < 3; ++j) {
                r(2, j) *= u;
                r(j, 2) *= std::conj(u);
            }
            r(2, 2) = complexd(r(2, 2).real(), 0.0);
        }
        ++next_jump;
    }

    // unflatten
    if (s0.rep == Representation::Amplitude) {
        out.final_state.amps << y[0], y[1], y[2];
    } else {
        out.final_state.rho = Eigen::Map<Eigen::Matrix3cd>(y.data());
    }
    return out;
}

struct TimeSeries {
    std::vector<double> times;
    std::vector<AtomState> states;
    std::vector<double> p2;
    std::vector<double> delta;
    std::vector<double> drive_phase;
};

inline AtomState state_from_flat(const ode::State& y, Representation rep) {
    AtomState s;
    s.rep = rep;
    if (rep == Representation::Amplitude) {
        s.amps << y[0], y[1], y[2];
    } else {
        s.rho = Eigen::Map<const Eigen::Matrix3cd>(y.data());
    }
    return s;
}

// Integrate and sample on a uniform grid of n_samples points over [0, t_end]
// (both ends included).
inline TimeSeries integrate(const AtomState& s0, const DriveWaveform& wf,
                            double t_end, double tol = 1e-9,
                            std::size_t n_samples = 1001) {
    if (!(t_end > 0.0)) throw ConfigError("integrate: t_end must be > 0");
    if (n_samples < 2) throw ConfigError("integrate: need at least 2 samples");
    PathResult pr = integrate_path(s0, wf, 0.0, t_end, tol);
    TimeSeries ts;
    ts.times.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = t_end * double(i) / double(n_samples - 1);
        AtomState s = (i + 1 == n_samples)
                          ? pr.final_state
                          : state_from_flat(pr.path.eval(t), s0.rep);
        ts.times.push_back(t);
        ts.p2.push_back(s.p2());
        ts.delta.push_back(wf.detuning_at(t));
        ts.drive_phase.push_back(wf.drive_phase(t));
        ts.states.push_back(std::move(s));
    }
    return ts;
}

// Per-cycle phase gained by the |0>-|1> coherence due to the light shift of
// |1>, in the convention where a raised |1> gives a positive result: the
// integration frame already removes the free evolution, so arg c1 moves only
// through the light-induced shift, and s = -d(arg c1)/d(cycle).
// Measured extremum-to-extremum (whole modulation cycles from t = 0) with
// gamma2 = 0 coherent evolution.
inline double stark_phase(const TimeSeries& series, const DriveWaveform& wf) {
    if (series.times.size() < 8)
        throw ConfigError("stark_phase: series too short");
    if (std::abs(series.times.front()) > 1e-12)
        throw ConfigError("stark_phase: series must start at t = 0");
    const double T = wf.period();
    const int cycles = int(std::floor(series.times.back() / T + 1e-9));
    if (cycles < 1)
        throw ConfigError("stark_phase: series must span at least one cycle");
    for (const auto& s : series.states)
        if (s.rep != Representation::Amplitude)
            throw ConfigError("stark_phase: amplitude-mode series required");

    // unwrap arg(c1) along the sample grid
    std::vector<double> ph(series.times.size());
    double prev = std::arg(series.states[0].c1());
    ph[0] = prev;
    double offset = 0.0;
    for (std::size_t i = 1; i < series.states.size(); ++i) {
        const complexd c1 = series.states[i].c1();
        if (std::abs(c1) < 1e-6)
            throw NumericsError("stark_phase: phase reference lost (|c1| ~ 0)");
        const double a = std::arg(c1);
        double d = a - prev;
        if (d > std::numbers::pi) offset -= kTwoPi;
        if (d < -std::numbers::pi) offset += kTwoPi;
        ph[i] = a + offset;
        prev = a;
    }

    // interpolate unwrapped phase at t = cycles * T
    const double t_target = double(cycles) * T;
    double ph_end = ph.back();
    for (std::size_t i = 1; i < series.times.size(); ++i) {
        if (series.times[i] >= t_target - 1e-12) {
            const double t0 = series.times[i - 1], t1 = series.times[i];
            const double w = (t1 > t0) ? (t_target - t0) / (t1 - t0) : 1.0;
            ph_end = ph[i - 1] + w * (ph[i] - ph[i - 1]);
            break;
        }
    }
    return -(ph_end - ph[0]) / double(cycles);
}

// Convenience: integrate n_cycles coherently (gamma2 forced to 0) and return
// the per-cycle Stark phase.
inline double stark_phase_of(const DriveWaveform& wf, int n_cycles = 1,
                             double tol = 1e-10,
                             std::size_t samples_per_cycle = 4096) {
    DriveWaveform coherent = wf.with_gamma2(0.0);
    const double t_end = double(n_cycles) * coherent.period();
    TimeSeries ts = integrate(AtomState::ground(), coherent, t_end, tol,
                              n_cycles * samples_per_cycle + 1);
    return stark_phase(ts, coherent);
}

// Adiabatic (dressed-state) estimate of the per-cycle Stark phase: integral
// of (sqrt(delta^2 + omega_r^2) - delta)/2 over one modulation cycle.  This
// upper-bound estimate assumes the atom follows the upper dressed branch
// through the resonance touch; the dynamical value from stark_phase is
// smaller when passage is mostly diabatic.
inline double stark_phase_adiabatic(const DriveWaveform& wf,
                                    std::size_t panels = 1 << 14) {
    const double T = wf.period();
    const double h = T / double(panels);
    const auto f = [&wf](double t) {
        const double d = wf.detuning_at(t);
        return 0.5 * (std::hypot(d, wf.omega_r) - d);
    };
    // composite Simpson
    double sum = f(0.0) + f(T);
    for (std::size_t i = 1; i < panels; ++i)
        sum += f(double(i) * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

// 2x2 propagator of the driven (c1, b2) subspace over [t0, t1], including any
// scheduled phase jumps inside the interval; columns are evolved basis states.
inline Eigen::Matrix2cd driven_propagator(const DriveWaveform& wf, double t0,
                                          double t1, double tol = 1e-10) {
    Eigen::Matrix2cd u;
    for (int col = 0; col < 2; ++col) {
        AtomState s = AtomState::pure(0.0, col == 0 ? 1.0 : 0.0,
                                      col == 0 ? 0.0 : 1.0);
        PathResult pr = integrate_path(s, wf, t0, t1, tol);
        u(0, col) = pr.final_state.amps[1];
        u(1, col) = pr.final_state.amps[2];
    }
    return u;
}

// Same propagator with its dense time history retained, so U(t0 -> t) can be
// evaluated anywhere in [t0, t1] without re-integration.
struct DrivenPropagatorPath {
    double t0 = 0.0;
    double t1 = 0.0;
    ode::DensePath cols[2];

    Eigen::Matrix2cd at(double t) const {
        Eigen::Matrix2cd u;
        for (int col = 0; col < 2; ++col) {
            const ode::State y = cols[col].eval(t);
            u(0, col) = y[1];
            u(1, col) = y[2];
        }
        return u;
    }
    Eigen::Matrix2cd end() const { return at(t1); }
};

inline DrivenPropagatorPath driven_propagator_path(const DriveWaveform& wf,
                                                   double t0, double t1,
                                                   double tol = 1e-10) {
    DrivenPropagatorPath p;
    p.t0 = t0;
    p.t1 = t1;
    for (int col = 0; col < 2; ++col) {
        AtomState s = AtomState::pure(0.0, col == 0 ? 1.0 : 0.0,
                                      col == 0 ? 0.0 : 1.0);
        PathResult pr = integrate_path(s, wf, t0, t1, tol);
        p.cols[col] = std::move(pr.path);
    }
    return p;
}

// CSV export: t, amplitudes (c2 reconstructed in the non-rotating drive frame
// via the accumulated drive phase), P2, delta, drive phase.
inline void write_time_series_csv(std::ostream& os, const TimeSeries& ts) {
    const bool amp_mode =
        !ts.states.empty() && ts.states[0].rep == Representation::Amplitude;
    char buf[64];
    const auto put = [&](double v, bool last = false) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << (last ? "\n" : ",");
    };
    if (amp_mode) {
        os << "t,re_c0,im_c0,re_c1,im_c1,re_c2,im_c2,p2,delta,drive_phase\n";
        for (std::size_t i = 0; i < ts.times.size(); ++i) {
            const auto& a = ts.states[i].amps;
            const complexd c2 = a[2] * std::exp(-kI * ts.drive_phase[i]);
            put(ts.times[i]);
            put(a[0].real());
            put(a[0].imag());
            put(a[1].real());
            put(a[1].imag());
            put(c2.real());
            put(c2.imag());
            put(ts.p2[i]);
            put(ts.delta[i]);
            put(ts.drive_phase[i], true);
        }
    } else {
        os << "t,rho00,rho11,rho22,re_rho01,im_rho01,re_rho12,im_rho12,"
              "re_rho02,im_rho02,p2,delta,drive_phase\n";
        for (std::size_t i = 0; i < ts.times.size(); ++i) {
            const auto& r = ts.states[i].rho;
            put(ts.times[i]);
            put(r(0, 0).real());
            put(r(1, 1).real());
            put(r(2, 2).real());
            put(r(0, 1).real());
            put(r(0, 1).imag());
            put(r(1, 2).real());
            put(r(1, 2).imag());
            put(r(0, 2).real());
            put(r(0, 2).imag());
            put(ts.p2[i]);
            put(ts.delta[i]);
            put(ts.drive_phase[i], true);
        }
    }
}

}  // namespace phasejump
