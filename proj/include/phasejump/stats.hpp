#pragma once

// Statistics helpers: running summaries, circular statistics, histograms,
// Kolmogorov-Smirnov tests, Wilson intervals, linear and first-harmonic
// regression, and the noncentral-chi-square power solver used for minimum
// detectable amplitudes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace phasejump::stats {

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased (n-1 denominator)
    double stddev = 0.0;
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
};

inline Summary summarize(std::span<const double> x) {
    Summary s;
    s.n = x.size();
    if (x.empty()) return s;
    // Welford's algorithm.
    double mean = 0.0, m2 = 0.0;
    double lo = x[0], hi = x[0];
    std::size_t k = 0;
    for (double v : x) {
        ++k;
        const double d = v - mean;
        mean += d / double(k);
        m2 += d * (v - mean);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    s.mean = mean;
    s.variance = (s.n > 1) ? m2 / double(s.n - 1) : 0.0;
    s.stddev = std::sqrt(s.variance);
    s.min = lo;
    s.max = hi;
    return s;
}

// --- circular statistics ---------------------------------------------------

struct CircularSummary {
    std::size_t n = 0;
    double r = 0.0;           // mean resultant length, 0 = uniform, 1 = locked
    double mean_angle = 0.0;  // arg of the resultant, in (-pi, pi]
    double stddev = std::numeric_limits<double>::infinity();  // sqrt(-2 ln R)
};

inline CircularSummary circular_summary(std::span<const double> angles) {
    CircularSummary s;
    s.n = angles.size();
    if (angles.empty()) return s;
    double c = 0.0, sn = 0.0;
    for (double a : angles) {
        c += std::cos(a);
        sn += std::sin(a);
    }
    c /= double(s.n);
    sn /= double(s.n);
    s.r = std::hypot(c, sn);
    s.mean_angle = std::atan2(sn, c);
    if (s.r > 0.0) s.stddev = std::sqrt(std::max(0.0, -2.0 * std::log(s.r)));
    return s;
}

// --- histograms -------------------------------------------------------------

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;
    std::size_t underflow = 0;
    std::size_t overflow = 0;
    std::size_t total = 0;

    double bin_width() const { return (hi - lo) / double(counts.size()); }
    double bin_center(std::size_t i) const {
        return lo + (double(i) + 0.5) * bin_width();
    }
};

inline Histogram histogram(std::span<const double> x, double lo, double hi,
                           std::size_t nbins) {
    if (!(hi > lo) || nbins == 0)
        throw std::invalid_argument("histogram: bad range or bin count");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(nbins, 0);
    for (double v : x) {
        ++h.total;
        if (v < lo) {
            ++h.underflow;
        } else if (v >= hi) {
            ++h.overflow;
        } else {
            auto i = std::size_t((v - lo) / (hi - lo) * double(nbins));
            if (i >= nbins) i = nbins - 1;  // guard against roundoff at hi
            ++h.counts[i];
        }
    }
    return h;
}

// --- Kolmogorov-Smirnov ------------------------------------------------------

// Survival function of the Kolmogorov distribution,
// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
    if (lambda < 0.15) return 1.0;  // series is ill-conditioned; p is ~1 here
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * double(k) * double(k) * lambda * lambda);
        sum += sign * term;
        if (term < 1e-14) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    std::size_t n = 0;
    double d = 0.0;        // sup-norm distance between empirical and model CDF
    double p_value = 1.0;  // asymptotic, with the small-sample correction
};

// One-sample KS test given samples already transformed through the model CDF
// (so the null is uniformity on [0,1]).
inline KsResult ks_uniform(std::vector<double> u) {
    KsResult r;
    r.n = u.size();
    if (u.empty()) return r;
    std::sort(u.begin(), u.end());
    const double n = double(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double fe_hi = double(i + 1) / n;
        const double fe_lo = double(i) / n;
        d = std::max(d, std::max(fe_hi - u[i], u[i] - fe_lo));
    }
    r.d = d;
    const double sn = std::sqrt(n);
    r.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

template <class Cdf>
KsResult ks_test(std::span<const double> x, Cdf&& cdf) {
    std::vector<double> u;
    u.reserve(x.size());
    for (double v : x) u.push_back(std::clamp(double(cdf(v)), 0.0, 1.0));
    return ks_uniform(std::move(u));
}

inline KsResult ks_exponential(std::span<const double> x, double tau) {
    return ks_test(x, [tau](double v) { return -std::expm1(-v / tau); });
}

// --- binomial interval -------------------------------------------------------

struct WilsonInterval {
    double point = 0.0;
    double lo = 0.0;
    double hi = 1.0;
};

inline WilsonInterval wilson_interval(std::size_t successes, std::size_t n,
                                      double z = 1.959963984540054) {
    WilsonInterval w;
    if (n == 0) return w;
    const double p = double(successes) / double(n);
    w.point = p;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / double(n);
    const double center = (p + z2 / (2.0 * double(n))) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / double(n) + z2 / (4.0 * double(n) * double(n))) /
        denom;
    w.lo = std::max(0.0, center - half);
    w.hi = std::min(1.0, center + half);
    return w;
}

// --- linear regression -------------------------------------------------------

struct LineFit {
    std::size_t n = 0;
    double intercept = 0.0;
    double slope = 0.0;
    double se_intercept = 0.0;
    double se_slope = 0.0;
    double r2 = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("fit_line: need matched arrays, n >= 3");
    LineFit f;
    f.n = x.size();
    const double n = double(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("fit_line: degenerate x");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        rss += e * e;
    }
    const double sigma2 = rss / (n - 2.0);
    f.se_slope = std::sqrt(sigma2 / sxx);
    f.se_intercept = std::sqrt(sigma2 * (1.0 / n + mx * mx / sxx));
    f.r2 = (syy > 0.0) ? 1.0 - rss / syy : 1.0;
    return f;
}

// --- first-harmonic regression ----------------------------------------------

// OLS fit of y ~ c + a cos(phi) + b sin(phi).  The fitted curve equals
// c + amplitude * cos(phi - phase), so `phase` is where the fit peaks.
struct HarmonicFit {
    std::size_t n = 0;
    double c = 0.0;
    double a = 0.0;
    double b = 0.0;
    double cov_aa = 0.0;
    double cov_ab = 0.0;
    double cov_bb = 0.0;
    double amplitude = 0.0;
    double amplitude_se = 0.0;
    double phase = 0.0;
    double wald = 0.0;     // (a,b) Cov^-1 (a,b)^T, ~chi^2_2 under amplitude=0
    double p_value = 1.0;  // exp(-wald/2)
    bool degenerate = false;
};

inline HarmonicFit fit_harmonic(std::span<const double> phi,
                                std::span<const double> y) {
    if (phi.size() != y.size() || phi.size() < 4)
        throw std::invalid_argument("fit_harmonic: need matched arrays, n >= 4");
    HarmonicFit f;
    f.n = phi.size();
    const double n = double(phi.size());

    Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xty = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const Eigen::Vector3d row(1.0, std::cos(phi[i]), std::sin(phi[i]));
        xtx += row * row.transpose();
        xty += row * y[i];
    }

    // A one-sided phase distribution makes the design singular; flag instead
    // of returning garbage.
    Eigen::FullPivLU<Eigen::Matrix3d> lu(xtx);
    lu.setThreshold(1e-10);
    if (lu.rank() < 3) {
        f.degenerate = true;
        return f;
    }
    const Eigen::Vector3d beta = lu.solve(xty);
    f.c = beta(0);
    f.a = beta(1);
    f.b = beta(2);

    double rss = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double e =
            y[i] - (f.c + f.a * std::cos(phi[i]) + f.b * std::sin(phi[i]));
        rss += e * e;
    }
    const double sigma2 = rss / std::max(1.0, n - 3.0);
    const Eigen::Matrix3d cov = sigma2 * lu.inverse();
    f.cov_aa = cov(1, 1);
    f.cov_ab = cov(1, 2);
    f.cov_bb = cov(2, 2);

    f.amplitude = std::hypot(f.a, f.b);
    f.phase = std::atan2(f.b, f.a);
    if (f.amplitude > 1e-300) {
        const double ca = f.a / f.amplitude, cb = f.b / f.amplitude;
        const double var = ca * ca * f.cov_aa + 2.0 * ca * cb * f.cov_ab +
                           cb * cb * f.cov_bb;
        f.amplitude_se = std::sqrt(std::max(0.0, var));
    } else {
        f.amplitude_se = std::sqrt(0.5 * (f.cov_aa + f.cov_bb));
    }

    const double det = f.cov_aa * f.cov_bb - f.cov_ab * f.cov_ab;
    if (det <= 0.0 || !(std::isfinite(det))) {
        f.degenerate = true;
        return f;
    }
    f.wald = (f.a * f.a * f.cov_bb - 2.0 * f.a * f.b * f.cov_ab +
              f.b * f.b * f.cov_aa) /
             det;
    f.p_value = std::exp(-0.5 * f.wald);  // chi^2_2 survival
    return f;
}

// --- noncentral chi-square (2 dof) power -------------------------------------

// Survival P(X > c) for X ~ noncentral chi^2 with 2 dof and noncentrality
// lambda, via the Poisson mixture of central chi^2_{2+2k} tails.
inline double noncentral_chi2_2_sf(double c, double lambda) {
    if (c <= 0.0) return 1.0;
    const double hl = 0.5 * lambda;
    const double hc = 0.5 * c;
    // log-scale Poisson weights avoid overflow for large lambda
    double log_t = -hl;              // log of (lambda/2)^k / k! * exp(-lambda/2)
    double chi_term = std::exp(-hc); // (c/2)^j / j! * exp(-c/2), j = 0
    double chi_partial = chi_term;   // central chi^2_{2+2k} survival at c
    double sum = 0.0;
    for (int k = 0; k < 100000; ++k) {
        if (k > 0) {
            log_t += std::log(hl) - std::log(double(k));
            chi_term *= hc / double(k);
            chi_partial += chi_term;
        }
        const double contrib = std::exp(log_t) * chi_partial;
        sum += contrib;
        // Poisson tail beyond k is negligible once we are far past the mean.
        if (double(k) > hl + 10.0 * std::sqrt(hl + 1.0) && contrib < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

// chi^2_2 upper quantile: P(chi^2_2 > c) = size  =>  c = -2 ln(size).
inline double chi2_2_quantile(double size) { return -2.0 * std::log(size); }

namespace detail {

// regularized lower incomplete gamma P(a, x), series branch (x < a + 1)
inline double gammp_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// regularized upper incomplete gamma Q(a, x), continued fraction (x >= a + 1)
inline double gammq_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// chi^2 survival P(X > x) for any dof (regularized incomplete gamma)
inline double chi2_sf(double x, double dof) {
    if (!(dof > 0.0)) throw std::invalid_argument("chi2_sf: dof must be > 0");
    if (x <= 0.0) return 1.0;
    const double a = 0.5 * dof, hx = 0.5 * x;
    const double q = (hx < a + 1.0) ? 1.0 - detail::gammp_series(a, hx)
                                    : detail::gammq_cf(a, hx);
    return std::clamp(q, 0.0, 1.0);
}

// Noncentrality lambda* such that a Wald test of size `size` on 2 dof reaches
// the requested power.  (size 0.05, power 0.95 gives lambda* ~ 15.44.)
inline double wald_lambda_for_power(double size = 0.05, double power = 0.95) {
    if (!(size > 0.0 && size < 1.0 && power > 0.0 && power < 1.0))
        throw std::invalid_argument("wald_lambda_for_power: bad size/power");
    const double c = chi2_2_quantile(size);
    double lo = 0.0, hi = 1.0;
    while (noncentral_chi2_2_sf(c, hi) < power && hi < 1e6) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (noncentral_chi2_2_sf(c, mid) < power)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace phasejump::stats
