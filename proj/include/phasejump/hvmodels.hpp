#pragma once

// Measurement-outcome models: the Born rule and a parametric phase-dependent
// family P0 = clamp(alpha^2 + epsilon * g(phi)), with zero-mean 2pi-periodic
// g; plus the detection statistics that quantify how visible a given epsilon
// is in phase-tagged outcome data.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasejump/core.hpp"
#include "phasejump/errors.hpp"
#include "phasejump/rng.hpp"
#include "phasejump/stats.hpp"

namespace phasejump {

enum class GKind { Cos, SquareWindow, Table };

// Zero-mean 2pi-periodic modulation shape.  Library shapes: cos(phi + phi0),
// a +-1 square window, and a user table interpreted as a periodic
// piecewise-linear function (its mean is removed on construction).
class ModulationG {
  public:
    static ModulationG cosine(double phi0 = 0.0) {
        ModulationG g;
        g.kind_ = GKind::Cos;
        g.phi0_ = phi0;
        return g;
    }

    static ModulationG square_window(double phi0 = 0.0) {
        ModulationG g;
        g.kind_ = GKind::SquareWindow;
        g.phi0_ = phi0;
        return g;
    }

    // Breakpoints (phi_i, g_i) with phi strictly increasing in [0, 2pi); the
    // last segment wraps around to the first point.
    static ModulationG from_table(std::vector<std::pair<double, double>> pts) {
        if (pts.size() < 2)
            throw ConfigError("ModulationG: table needs at least 2 points");
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].first < 0.0 || pts[i].first >= kTwoPi)
                throw ConfigError("ModulationG: table phi values must lie in [0, 2pi)");
            if (i > 0 && !(pts[i].first > pts[i - 1].first))
                throw ConfigError("ModulationG: table phi values must be distinct");
        }
        ModulationG g;
        g.kind_ = GKind::Table;
        g.table_ = std::move(pts);
        // remove the exact piecewise-linear mean over one period
        double area = 0.0;
        const std::size_t n = g.table_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto [x0, y0] = g.table_[i];
            const auto [x1r, y1] = g.table_[(i + 1) % n];
            const double x1 = (i + 1 == n) ? x1r + kTwoPi : x1r;
            area += 0.5 * (y0 + y1) * (x1 - x0);
        }
        const double mean = area / kTwoPi;
        for (auto& p : g.table_) p.second -= mean;
        return g;
    }

    GKind kind() const { return kind_; }
    double phi0() const { return phi0_; }
    const std::vector<std::pair<double, double>>& table() const { return table_; }

    double operator()(double phi) const {
        switch (kind_) {
            case GKind::Cos:
                return std::cos(phi + phi0_);
            case GKind::SquareWindow:
                return wrap_2pi(phi + phi0_) < std::numbers::pi ? 1.0 : -1.0;
            case GKind::Table:
                return eval_table(wrap_2pi(phi));
        }
        return 0.0;
    }

    double max_abs() const {
        if (kind_ != GKind::Table) return 1.0;
        double m = 0.0;
        for (const auto& p : table_) m = std::max(m, std::abs(p.second));
        return m;
    }

    // exact circle mean (zero for cos and the half-circle window; tables have
    // their piecewise-linear mean removed on construction)
    double mean_residual() const {
        if (kind_ != GKind::Table) return 0.0;
        double area = 0.0;
        const std::size_t n = table_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto [x0, y0] = table_[i];
            const auto [x1r, y1] = table_[(i + 1) % n];
            const double x1 = (i + 1 == n) ? x1r + kTwoPi : x1r;
            area += 0.5 * (y0 + y1) * (x1 - x0);
        }
        return area / kTwoPi;
    }

  private:
    double eval_table(double phi) const {
        const std::size_t n = table_.size();
        // find segment: largest i with phi_i <= phi, wrapping
        std::size_t lo = 0, hi = n;
        while (lo + 1 < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (table_[mid].first <= phi)
                lo = mid;
            else
                hi = mid;
        }
        std::size_t i = (phi < table_[0].first) ? n - 1 : lo;
        const auto [x0, y0] = table_[i];
        const auto [x1r, y1] = table_[(i + 1) % n];
        double x = phi, xa = x0, xb = (i + 1 == n || phi < table_[0].first)
                                          ? x1r + kTwoPi
                                          : x1r;
        if (phi < table_[0].first) {
            x += kTwoPi;  // wrapped segment
            xa = table_[n - 1].first;
            xb = table_[0].first + kTwoPi;
        }
        const double w = (xb > xa) ? (x - xa) / (xb - xa) : 0.0;
        return y0 + w * (y1 - y0);
    }

    GKind kind_ = GKind::Cos;
    double phi0_ = 0.0;
    std::vector<std::pair<double, double>> table_;
};

enum class ModelKind { Born, PhaseDependent };

struct OutcomeProbability {
    double p0 = 0.0;
    double p1 = 0.0;
    bool clamped = false;
};

struct MeasurementModel {
    ModelKind kind = ModelKind::Born;
    double epsilon = 0.0;  // in [0, 0.5]
    ModulationG g = ModulationG::cosine(0.0);

    static MeasurementModel born() { return {}; }

    static MeasurementModel phase_dependent(double epsilon, ModulationG g) {
        if (!(epsilon >= 0.0 && epsilon <= 0.5))
            throw ConfigError("MeasurementModel: epsilon must lie in [0, 0.5]");
        if (std::abs(g.mean_residual()) > 1e-9)
            throw ConfigError("MeasurementModel: g must have zero mean");
        MeasurementModel m;
        m.kind = ModelKind::PhaseDependent;
        m.epsilon = epsilon;
        m.g = std::move(g);
        return m;
    }

    OutcomeProbability p0(double alpha, double phi) const {
        OutcomeProbability o;
        const double born = alpha * alpha;
        if (kind == ModelKind::Born) {
            o.p0 = born;
        } else {
            const double raw = born + epsilon * g(phi);
            o.p0 = std::clamp(raw, 0.0, 1.0);
            o.clamped = raw != o.p0;
        }
        o.p1 = 1.0 - o.p0;
        return o;
    }
};

inline OutcomeProbability outcome_probability(const TwoStateAmplitudes& state,
                                              const MeasurementModel& model) {
    return model.p0(state.alpha, state.phi_mod());
}

// Bernoulli draw: returns 0 with probability P0, else 1.
inline int sample_outcome(const TwoStateAmplitudes& state,
                          const MeasurementModel& model, Rng& rng,
                          bool* clamped = nullptr) {
    const OutcomeProbability o = outcome_probability(state, model);
    if (clamped) *clamped = o.clamped;
    return rng.uniform() < o.p0 ? 0 : 1;
}

struct PhaseAveragedP0 {
    double p0_avg = 0.0;
    bool clamping_active = false;
    double bias_bound = 0.0;  // |p0_avg - alpha^2|, zero without clamping
};

namespace detail {

// exact circle average of clamp(c + e*cos(x), 0, 1)
inline double clamped_cos_average(double c, double e) {
    double corr = 0.0;
    if (c + e > 1.0 && e > 0.0) {
        const double x1 = std::acos(std::clamp((1.0 - c) / e, -1.0, 1.0));
        corr += 2.0 * (x1 * (1.0 - c) - e * std::sin(x1));
    }
    if (c - e < 0.0 && e > 0.0) {
        const double x2 = std::acos(std::clamp(-c / e, -1.0, 1.0));
        corr -= 2.0 * (c * (std::numbers::pi - x2) - e * std::sin(x2));
    }
    return c + corr / kTwoPi;
}

// exact integral of clamp(y0 + (y1-y0) * s, 0, 1) ds over s in [0, 1]
inline double clamped_linear_unit_integral(double y0, double y1) {
    if (y0 > y1) std::swap(y0, y1);
    const double dy = y1 - y0;
    if (y1 <= 0.0) return 0.0;
    if (y0 >= 1.0) return 1.0;
    if (dy < 1e-300) return std::clamp(y0, 0.0, 1.0);
    // s-coordinates where the line crosses 0 and 1, clipped to [0,1]
    const double s0 = std::clamp((0.0 - y0) / dy, 0.0, 1.0);
    const double s1 = std::clamp((1.0 - y0) / dy, 0.0, 1.0);
    // below s0: 0; between: linear; above s1: 1
    const double ya = y0 + dy * s0, yb = y0 + dy * s1;
    return 0.5 * (ya + yb) * (s1 - s0) + (1.0 - s1);
}

}  // namespace detail

// (1/2pi) * integral of P0(alpha, phi) d phi.  Equals alpha^2 exactly for any
// zero-mean g when no clamping occurs; with clamping active the exact clamped
// average and its bias from alpha^2 are reported.
inline PhaseAveragedP0 phase_averaged_probability(const MeasurementModel& model,
                                                  double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("phase_averaged_probability: alpha must lie in [0,1]");
    PhaseAveragedP0 out;
    const double c = alpha * alpha;
    if (model.kind == ModelKind::Born || model.epsilon == 0.0) {
        out.p0_avg = c;
        return out;
    }
    const double e = model.epsilon;
    out.clamping_active =
        c + e * model.g.max_abs() > 1.0 || c - e * model.g.max_abs() < 0.0;

    switch (model.g.kind()) {
        case GKind::Cos:
            out.p0_avg = out.clamping_active ? detail::clamped_cos_average(c, e) : c;
            break;
        case GKind::SquareWindow:
            out.p0_avg = out.clamping_active
                             ? 0.5 * (std::clamp(c + e, 0.0, 1.0) +
                                      std::clamp(c - e, 0.0, 1.0))
                             : c;
            break;
        case GKind::Table: {
            if (!out.clamping_active) {
                out.p0_avg = c;  // zero-mean table averages out exactly
                break;
            }
            const auto& tb = model.g.table();
            const std::size_t n = tb.size();
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto [x0, y0] = tb[i];
                const auto [x1r, y1] = tb[(i + 1) % n];
                const double x1 = (i + 1 == n) ? x1r + kTwoPi : x1r;
                acc += detail::clamped_linear_unit_integral(c + e * y0, c + e * y1) *
                       (x1 - x0);
            }
            out.p0_avg = acc / kTwoPi;
            break;
        }
    }
    out.bias_bound = std::abs(out.p0_avg - c);
    return out;
}

struct PhaseTaggedOutcome {
    double phi = 0.0;    // phase at measurement, [0, 2pi)
    int outcome = 0;     // 0 or 1
    double weight = 1.0;  // reserved
};

struct HvTestReport {
    double epsilon_hat = 0.0;
    double stderr_ = 0.0;
    double p_value = 1.0;
    double min_detectable_epsilon = 0.0;
    std::size_t n = 0;
    double phase_concentration_r = 0.0;
    double phi0_hat = 0.0;  // offset such that fit ~ cos(phi + phi0_hat)
    bool degenerate = false;
};

inline void to_json(nlohmann::json& j, const HvTestReport& r) {
    j = nlohmann::json{{"epsilon_hat", r.epsilon_hat},
                       {"stderr", r.stderr_},
                       {"p_value", r.p_value},
                       {"min_detectable_epsilon", r.min_detectable_epsilon},
                       {"n", r.n},
                       {"phase_concentration_R", r.phase_concentration_r},
                       {"phi0_hat", r.phi0_hat},
                       {"degenerate", r.degenerate}};
}

// First-harmonic regression of outcome against phase.  The indicator of
// outcome 0 is regressed on [1, cos phi, sin phi]; the fitted amplitude
// estimates epsilon * |g|'s first harmonic (equal to epsilon for g = cos).
// min_detectable_epsilon is the amplitude a size-0.05 Wald test would detect
// with 95% power given this sample's phase design.
inline HvTestReport detect_phase_dependence(
    std::span<const PhaseTaggedOutcome> data) {
    if (data.size() < 100)
        throw ConfigError("detect_phase_dependence: need at least 100 outcomes");
    HvTestReport rep;
    rep.n = data.size();

    std::vector<double> phi, y;
    phi.reserve(data.size());
    y.reserve(data.size());
    for (const auto& d : data) {
        phi.push_back(d.phi);
        y.push_back(d.outcome == 0 ? 1.0 : 0.0);
    }
    rep.phase_concentration_r = stats::circular_summary(phi).r;

    const stats::HarmonicFit fit = stats::fit_harmonic(phi, y);
    if (fit.degenerate) {
        rep.degenerate = true;
        return rep;
    }
    rep.epsilon_hat = fit.amplitude;
    rep.stderr_ = fit.amplitude_se;
    rep.p_value = fit.p_value;
    rep.phi0_hat = wrap_2pi(-fit.phase);

    static const double lambda_star = stats::wald_lambda_for_power(0.05, 0.95);
    const double tr = 0.5 * (fit.cov_aa + fit.cov_bb);
    const double disc = std::sqrt(0.25 * (fit.cov_aa - fit.cov_bb) *
                                      (fit.cov_aa - fit.cov_bb) +
                                  fit.cov_ab * fit.cov_ab);
    rep.min_detectable_epsilon = std::sqrt(lambda_star * (tr + disc));
    return rep;
}

struct BinnedChi2Report {
    double chi2 = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    std::size_t n_bins_used = 0;
};

// Alternative detector: chi^2 homogeneity of the outcome-0 rate across phase
// bins (lower power than the harmonic fit for smooth g, but shape-agnostic).
inline BinnedChi2Report detect_phase_dependence_binned(
    std::span<const PhaseTaggedOutcome> data, std::size_t nbins = 16) {
    if (data.size() < 100)
        throw ConfigError("detect_phase_dependence_binned: need >= 100 outcomes");
    if (nbins < 2)
        throw ConfigError("detect_phase_dependence_binned: need >= 2 bins");
    std::vector<double> n(nbins, 0.0), k(nbins, 0.0);
    double k_tot = 0.0;
    for (const auto& d : data) {
        auto b = std::size_t(wrap_2pi(d.phi) / kTwoPi * double(nbins));
        if (b >= nbins) b = nbins - 1;
        n[b] += 1.0;
        if (d.outcome == 0) {
            k[b] += 1.0;
            k_tot += 1.0;
        }
    }
    const double p_pool = k_tot / double(data.size());
    BinnedChi2Report rep;
    if (p_pool <= 0.0 || p_pool >= 1.0) return rep;  // no variation possible
    for (std::size_t b = 0; b < nbins; ++b) {
        if (n[b] < 5.0) continue;  // skip sparse bins
        const double e = n[b] * p_pool;
        const double v = n[b] * p_pool * (1.0 - p_pool);
        rep.chi2 += (k[b] - e) * (k[b] - e) / v;
        ++rep.n_bins_used;
    }
    if (rep.n_bins_used < 2) return rep;
    rep.dof = double(rep.n_bins_used - 1);
    rep.p_value = stats::chi2_sf(rep.chi2, rep.dof);
    return rep;
}

}  // namespace phasejump
