#pragma once

// Adaptive Dormand-Prince 5(4) integration for complex state vectors, with a
// 4th-order continuous extension (dense output) stored per accepted step so
// callers can sample the solution anywhere without re-integrating, and with
// exact endpoint clamping so drive-phase jumps can be applied at scheduled
// times between segments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "phasejump/errors.hpp"

namespace phasejump::ode {

using State = Eigen::VectorXcd;

struct Options {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_init = 0.0;  // 0 = choose automatically
    double h_max = 0.0;   // 0 = no cap
    std::size_t max_steps = 20'000'000;
    bool keep_path = true;  // store dense-output coefficients
};

struct Diagnostics {
    std::size_t n_steps = 0;
    std::size_t n_rejected = 0;
    std::size_t n_rhs = 0;
    double h_min = std::numeric_limits<double>::infinity();
    double h_last = 0.0;

    void merge(const Diagnostics& other) {
        n_steps += other.n_steps;
        n_rejected += other.n_rejected;
        n_rhs += other.n_rhs;
        h_min = std::min(h_min, other.h_min);
        h_last = other.h_last;
    }
};

// One accepted step's interpolation coefficients (Hairer's contd5 form):
// y(t0 + theta*h) = r1 + theta*(r2 + (1-theta)*(r3 + theta*(r4 + (1-theta)*r5)))
struct StepRecord {
    double t0 = 0.0;
    double t1 = 0.0;
    std::array<State, 5> rcont;
};

class DensePath {
  public:
    bool empty() const { return steps_.empty(); }
    double t_begin() const { return steps_.front().t0; }
    double t_end() const { return steps_.back().t1; }

    void append(StepRecord step) { steps_.push_back(std::move(step)); }

    void append(DensePath other) {
        for (auto& s : other.steps_) steps_.push_back(std::move(s));
    }

    // Evaluate the stored interpolant; t is clamped into the covered span.
    State eval(double t) const {
        if (steps_.empty()) throw NumericsError("DensePath::eval on empty path");
        const StepRecord& s = locate(t);
        const double h = s.t1 - s.t0;
        const double theta =
            (h > 0.0) ? std::clamp((t - s.t0) / h, 0.0, 1.0) : 0.0;
        const double theta1 = 1.0 - theta;
        return s.rcont[0] +
               theta * (s.rcont[1] +
                        theta1 * (s.rcont[2] +
                                  theta * (s.rcont[3] + theta1 * s.rcont[4])));
    }

  private:
    const StepRecord& locate(double t) const {
        // binary search for the step containing t
        std::size_t lo = 0, hi = steps_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (t <= steps_[mid].t1)
                hi = mid;
            else
                lo = mid + 1;
        }
        return steps_[lo];
    }

    std::vector<StepRecord> steps_;
};

struct Result {
    State y;
    DensePath path;
    Diagnostics diag;
};

namespace detail {

// Dormand-Prince coefficients.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// e = b5 - b4 (error-estimator weights)
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output weights
inline constexpr double d1 = -12715105075.0 / 11282082432.0,
                        d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0,
                        d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0,
                        d7 = 69997945.0 / 29380423.0;

inline double error_norm(const State& err, const State& y0, const State& y1,
                         double atol, double rtol) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double scale =
            atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = std::abs(err[i]) / scale;
        sum += q * q;
    }
    return std::sqrt(sum / double(err.size()));
}

}  // namespace detail

// Integrate dy/dt = rhs(t, y) from t0 to t1 (t1 >= t0), hitting t1 exactly.
// `on_step`, when set, runs after every accepted step with (t, y).
template <class F>
Result integrate(F&& rhs, double t0, State y0, double t1, const Options& opt,
                 const std::function<void(double, const State&)>& on_step = {}) {
    using namespace detail;
    if (!(t1 >= t0)) throw NumericsError("ode::integrate: t1 must be >= t0");
    if (!(opt.rtol > 0.0 && opt.atol >= 0.0))
        throw NumericsError("ode::integrate: bad tolerances");

    Result res;
    res.y = std::move(y0);
    if (t1 == t0) return res;

    const Eigen::Index n = res.y.size();
    State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n),
        yerr(n);

    double t = t0;
    rhs(t, res.y, k1);
    ++res.diag.n_rhs;

    // initial step size: Hairer's heuristic
    double h = opt.h_init;
    if (h <= 0.0) {
        double d0 = 0.0, d1n = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::abs(res.y[i]);
            d0 += std::norm(res.y[i] / sc);
            d1n += std::norm(k1[i] / sc);
        }
        d0 = std::sqrt(d0 / double(n));
        d1n = std::sqrt(d1n / double(n));
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min(h0, t1 - t0);
        ytmp = res.y + h0 * k1;
        rhs(t + h0, ytmp, k2);
        ++res.diag.n_rhs;
        double d2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::abs(res.y[i]);
            d2 += std::norm((k2[i] - k1[i]) / sc);
        }
        d2 = std::sqrt(d2 / double(n)) / h0;
        const double dm = std::max(d1n, d2);
        const double h1 =
            (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                          : std::pow(0.01 / dm, 0.2);
        h = std::min({100.0 * h0, h1, t1 - t0});
    }
    if (opt.h_max > 0.0) h = std::min(h, opt.h_max);

    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        if (t >= t1) break;
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw NumericsError("ode::integrate: step size underflow at t = " +
                                std::to_string(t));
        bool clamped = false;
        if (t + h >= t1) {
            h = t1 - t;
            clamped = true;
        }

        ytmp = res.y + h * (a21 * k1);
        rhs(t + c2 * h, ytmp, k2);
        ytmp = res.y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = res.y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = res.y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = res.y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = res.y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        rhs(t + h, ynew, k7);
        res.diag.n_rhs += 6;

        yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err = error_norm(yerr, res.y, ynew, opt.atol, opt.rtol);

        if (err <= 1.0) {
            if (opt.keep_path) {
                StepRecord rec;
                rec.t0 = t;
                rec.t1 = t + h;
                const State dy = ynew - res.y;
                rec.rcont[0] = res.y;
                rec.rcont[1] = dy;
                rec.rcont[2] = h * k1 - dy;
                rec.rcont[3] = dy - h * k7 - rec.rcont[2];
                rec.rcont[4] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 +
                                    d6 * k6 + d7 * k7);
                res.path.append(std::move(rec));
            }
            t += h;
            res.y.swap(ynew);
            k1.swap(k7);  // FSAL
            ++res.diag.n_steps;
            res.diag.h_min = std::min(res.diag.h_min, h);
            res.diag.h_last = h;
            if (on_step) on_step(t, res.y);
            if (clamped || t >= t1) return res;
            double fac = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
            fac = std::clamp(fac, 0.2, 5.0);
            h *= fac;
            if (opt.h_max > 0.0) h = std::min(h, opt.h_max);
        } else {
            ++res.diag.n_rejected;
            const double fac = std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            h *= fac;
        }
    }
    if (t < t1)
        throw NumericsError("ode::integrate: max step count exceeded at t = " +
                            std::to_string(t));
    return res;
}

}  // namespace phasejump::ode
